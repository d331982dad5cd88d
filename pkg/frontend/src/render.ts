// Scene construction for the tactics board. renderField turns a state,
// its prediction, and the overlay settings into a list of draw items in
// field coordinates; painting to a canvas happens elsewhere so the
// scene itself stays testable.

import { Prediction, StateDoc, SweepResult } from "./api.js";

export interface OverlayConfig {
    attentionThreshold: number;
    teamColors: Record<string, string>;
    showEndLine: boolean;
}

export const DEFAULT_OVERLAY: OverlayConfig = {
    attentionThreshold: 0.15,
    teamColors: {
        offense: "#d9442f",
        defense: "#2f63d9",
        T: "#d9a32f",
        CT: "#3fa7cf",
    },
    showEndLine: true,
};

export interface PlayerItem {
    kind: "player";
    id: string;
    x: number;
    y: number;
    z: number | null;
    color: string;
    muted: boolean;
    carrier: boolean;
    selected: boolean;
}

export interface AttentionEdgeItem {
    kind: "attention_edge";
    from: [number, number];
    to: [number, number];
    weight: number;
    width: number;
}

export interface EndLineItem {
    kind: "end_line";
    x: number;
}

export interface HeatCellItem {
    kind: "heat_cell";
    x: number;
    y: number;
    value: number;
    delta: number;
    best: boolean;
}

export type SceneItem =
    | PlayerItem
    | AttentionEdgeItem
    | EndLineItem
    | HeatCellItem;

export interface Scene {
    items: SceneItem[];
    bounds: { width: number; height: number };
}

const EDGE_WIDTH_SCALE = 6.0;
const FALLBACK_COLOR = "#888888";

function fieldBounds(state: StateDoc): { width: number; height: number } {
    const teams = new Set(state.players.map((p) => p.team));
    if (teams.has("offense")) {
        return { width: 120, height: 53.3 };
    }
    let w = 0;
    let h = 0;
    for (const p of state.players) {
        w = Math.max(w, Math.abs(p.position[0] ?? 0));
        h = Math.max(h, Math.abs(p.position[1] ?? 0));
    }
    return { width: w * 1.1 + 1, height: h * 1.1 + 1 };
}

/** Mean attention over heads, node i to node j, self-loops excluded. */
function meanAttention(attention: number[][][], i: number, j: number): number {
    let total = 0;
    for (const head of attention) {
        total += head[i]?.[j] ?? 0;
    }
    return total / attention.length;
}

export function renderField(
    state: StateDoc,
    prediction: Prediction | null,
    overlay: OverlayConfig,
    heatmap: SweepResult | null = null,
    selected: string | null = null,
): Scene {
    if (!(overlay.attentionThreshold >= 0 && overlay.attentionThreshold <= 1)) {
        throw new RangeError(
            `attention threshold must lie in [0, 1], got ${overlay.attentionThreshold}`,
        );
    }
    const items: SceneItem[] = [];

    if (heatmap) {
        const bestValue = Math.max(...heatmap.cells.map((c) => c.value));
        for (const cell of heatmap.cells) {
            items.push({
                kind: "heat_cell",
                x: cell.coords[0] ?? 0,
                y: cell.coords[1] ?? 0,
                value: cell.value,
                delta: cell.delta,
                best: cell.value === bestValue,
            });
        }
    }

    // Attention edges under the players, width proportional to the mean
    // coefficient, strictly above the threshold. Models without
    // attention simply contribute no edges.
    if (prediction && prediction.attention) {
        const byId = new Map(state.players.map((p) => [p.player_id, p]));
        const order = prediction.node_order;
        for (let i = 0; i < order.length; i++) {
            for (let j = 0; j < order.length; j++) {
                if (i === j) {
                    continue;
                }
                const w = meanAttention(prediction.attention, i, j);
                if (w <= overlay.attentionThreshold) {
                    continue;
                }
                const a = byId.get(order[i] ?? "");
                const b = byId.get(order[j] ?? "");
                if (!a || !b) {
                    continue;
                }
                items.push({
                    kind: "attention_edge",
                    from: [a.position[0] ?? 0, a.position[1] ?? 0],
                    to: [b.position[0] ?? 0, b.position[1] ?? 0],
                    weight: w,
                    width: w * EDGE_WIDTH_SCALE,
                });
            }
        }
    }

    for (const p of state.players) {
        items.push({
            kind: "player",
            id: p.player_id,
            x: p.position[0] ?? 0,
            y: p.position[1] ?? 0,
            z: p.position.length > 2 ? (p.position[2] ?? 0) : null,
            color: overlay.teamColors[p.team] ?? FALLBACK_COLOR,
            muted: p.alive === false,
            carrier: p.is_ball_carrier === true,
            selected: p.player_id === selected,
        });
    }

    if (overlay.showEndLine && prediction) {
        const carrier = state.players.find((p) => p.is_ball_carrier);
        if (carrier) {
            items.push({
                kind: "end_line",
                x: (carrier.position[0] ?? 0) + prediction.value,
            });
        }
    }

    return { items, bounds: fieldBounds(state) };
}
