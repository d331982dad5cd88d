// Browser entry point: paints the scene onto a canvas and forwards
// pointer interaction to the board. Everything numeric on screen came
// out of a service response.

import { ApiClient, StateDoc } from "./api.js";
import { Board } from "./board.js";
import {
    DEFAULT_OVERLAY,
    OverlayConfig,
    Scene,
    renderField,
} from "./render.js";

const canvas = document.getElementById("board") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const valueEl = document.getElementById("value") as HTMLSpanElement;
const deltaEl = document.getElementById("delta") as HTMLSpanElement;
const endLineEl = document.getElementById("endline") as HTMLSpanElement;
const toastEl = document.getElementById("toast") as HTMLDivElement;
const thresholdInput = document.getElementById("threshold") as HTMLInputElement;
const endLineToggle = document.getElementById("show-endline") as HTMLInputElement;
const undoBtn = document.getElementById("undo") as HTMLButtonElement;
const sweepBtn = document.getElementById("sweep") as HTMLButtonElement;
const stateInput = document.getElementById("state-file") as HTMLInputElement;

const params = new URLSearchParams(window.location.search);
const api = new ApiClient(params.get("service") ?? undefined);

const overlay: OverlayConfig = { ...DEFAULT_OVERLAY };
let board: Board | null = null;
let dragging: string | null = null;
const PLAYER_RADIUS = 9;

function toast(message: string): void {
    toastEl.textContent = message;
    toastEl.style.opacity = "1";
    setTimeout(() => {
        toastEl.style.opacity = "0";
    }, 2500);
}

function toPixels(scene: Scene, x: number, y: number): [number, number] {
    return [
        (x / scene.bounds.width) * canvas.width,
        (y / scene.bounds.height) * canvas.height,
    ];
}

function fromPixels(scene: Scene, px: number, py: number): [number, number] {
    return [
        (px / canvas.width) * scene.bounds.width,
        (py / canvas.height) * scene.bounds.height,
    ];
}

let scene: Scene | null = null;

function heatColor(delta: number, span: number): string {
    const t = span > 0 ? Math.max(-1, Math.min(1, delta / span)) : 0;
    const r = t > 0 ? 220 : 90;
    const g = 90 + Math.round(100 * (1 - Math.abs(t)));
    const b = t < 0 ? 220 : 90;
    return `rgba(${r}, ${g}, ${b}, 0.45)`;
}

function paint(): void {
    if (!board) {
        return;
    }
    scene = renderField(board.state, board.live, overlay, board.heatmap,
                        board.selected);
    ctx.fillStyle = "#1d2d1f";
    ctx.fillRect(0, 0, canvas.width, canvas.height);

    const deltas = scene.items
        .filter((it) => it.kind === "heat_cell")
        .map((it) => Math.abs((it as { delta: number }).delta));
    const span = deltas.length ? Math.max(...deltas) : 0;

    for (const item of scene.items) {
        if (item.kind === "heat_cell") {
            const [px, py] = toPixels(scene, item.x, item.y);
            ctx.fillStyle = heatColor(item.delta, span);
            ctx.fillRect(px - 14, py - 14, 28, 28);
            if (item.best) {
                ctx.strokeStyle = "#ffffff";
                ctx.strokeRect(px - 14, py - 14, 28, 28);
            }
        } else if (item.kind === "attention_edge") {
            const [x1, y1] = toPixels(scene, item.from[0], item.from[1]);
            const [x2, y2] = toPixels(scene, item.to[0], item.to[1]);
            ctx.strokeStyle = "rgba(255, 255, 160, 0.6)";
            ctx.lineWidth = item.width;
            ctx.beginPath();
            ctx.moveTo(x1, y1);
            ctx.lineTo(x2, y2);
            ctx.stroke();
        } else if (item.kind === "end_line") {
            const [px] = toPixels(scene, item.x, 0);
            ctx.strokeStyle = "#ffe066";
            ctx.lineWidth = 2;
            ctx.setLineDash([6, 4]);
            ctx.beginPath();
            ctx.moveTo(px, 0);
            ctx.lineTo(px, canvas.height);
            ctx.stroke();
            ctx.setLineDash([]);
        } else {
            const [px, py] = toPixels(scene, item.x, item.y);
            ctx.globalAlpha = item.muted ? 0.35 : 1.0;
            ctx.fillStyle = item.color;
            ctx.beginPath();
            ctx.arc(px, py, PLAYER_RADIUS, 0, 2 * Math.PI);
            ctx.fill();
            if (item.carrier || item.selected) {
                ctx.strokeStyle = item.carrier ? "#ffffff" : "#ffe066";
                ctx.lineWidth = 2;
                ctx.stroke();
            }
            ctx.globalAlpha = 1.0;
        }
    }

    valueEl.textContent = board.live ? board.live.value.toFixed(3) : "--";
    deltaEl.textContent =
        board.lastDelta === null ? "--" : board.lastDelta.toFixed(3);
    endLineEl.textContent =
        board.expectedEndLine === null
            ? "--"
            : board.expectedEndLine.toFixed(1);
}

function playerAt(px: number, py: number): string | null {
    if (!scene) {
        return null;
    }
    for (const item of scene.items) {
        if (item.kind !== "player") {
            continue;
        }
        const [x, y] = toPixels(scene, item.x, item.y);
        if ((x - px) ** 2 + (y - py) ** 2 <= PLAYER_RADIUS ** 2) {
            return item.id;
        }
    }
    return null;
}

function heatCellAt(px: number, py: number):
        { coords: number[] } | null {
    if (!scene || !board?.heatmap) {
        return null;
    }
    for (const cell of board.heatmap.cells) {
        const [x, y] = toPixels(scene, cell.coords[0] ?? 0,
                                cell.coords[1] ?? 0);
        if (Math.abs(x - px) <= 14 && Math.abs(y - py) <= 14) {
            return cell;
        }
    }
    return null;
}

canvas.addEventListener("pointerdown", async (ev) => {
    const id = playerAt(ev.offsetX, ev.offsetY);
    if (id && board) {
        dragging = id;
        board.select(id);
        paint();
        return;
    }
    const cell = heatCellAt(ev.offsetX, ev.offsetY);
    if (cell && board) {
        await board.applyCell(cell);
        paint();
    }
});

canvas.addEventListener("pointerup", async (ev) => {
    if (!dragging || !board || !scene) {
        return;
    }
    const [x, y] = fromPixels(scene, ev.offsetX, ev.offsetY);
    const id = dragging;
    dragging = null;
    const player = board.state.players.find((p) => p.player_id === id);
    const coords = player && player.position.length > 2
        ? [x, y, player.position[2] ?? 0]
        : [x, y];
    await board.dragPlayer(id, coords);
    paint();
});

undoBtn.addEventListener("click", () => {
    if (board && board.undo()) {
        paint();
    }
});

sweepBtn.addEventListener("click", async () => {
    if (!board || !board.selected) {
        toast("select a player first");
        return;
    }
    await board.runSweep(board.selected, { nx: 12, ny: 8 });
    paint();
});

thresholdInput.addEventListener("input", () => {
    overlay.attentionThreshold = Number(thresholdInput.value);
    paint();
});

endLineToggle.addEventListener("change", () => {
    overlay.showEndLine = endLineToggle.checked;
    paint();
});

stateInput.addEventListener("change", async () => {
    const file = stateInput.files?.[0];
    if (!file) {
        return;
    }
    try {
        const doc = JSON.parse(await file.text()) as StateDoc;
        board = new Board(api, doc, toast);
        await board.init();
        paint();
    } catch (err) {
        toast(err instanceof Error ? err.message : String(err));
    }
});
