// Client-side board state. Mutations round-trip through the service
// (nothing here predicts anything); the board tracks which response is
// current, keeps a bounded undo stack, and exposes the numbers the view
// displays.

import {
    ApiClient,
    Perturbation,
    Prediction,
    StateDoc,
    SweepResult,
} from "./api.js";

export const MAX_HISTORY = 50;
export const MAX_SWEEP_CELLS = 2500;

interface Snapshot {
    state: StateDoc;
    live: Prediction | null;
    lastDelta: number | null;
    expectedEndLine: number | null;
}

export type ToastFn = (message: string) => void;

function deepCopy<T>(doc: T): T {
    return JSON.parse(JSON.stringify(doc)) as T;
}

export class Board {
    state: StateDoc;
    selected: string | null = null;
    baseline: Prediction | null = null;
    live: Prediction | null = null;
    lastDelta: number | null = null;
    expectedEndLine: number | null = null;
    heatmap: SweepResult | null = null;
    pending = false;

    private history: Snapshot[] = [];
    private seq = 0;

    constructor(
        private readonly api: ApiClient,
        state: StateDoc,
        private readonly toast: ToastFn = () => {},
        readonly maxHistory: number = MAX_HISTORY,
    ) {
        this.state = deepCopy(state);
    }

    /** Fetch the baseline prediction for the starting scenario. */
    async init(): Promise<void> {
        this.baseline = await this.api.predict(this.state);
        this.live = this.baseline;
        this.lastDelta = null;
        this.expectedEndLine = null;
    }

    get undoDepth(): number {
        return this.history.length;
    }

    select(playerId: string | null): void {
        this.selected = playerId;
    }

    /**
     * Run one perturbation through /whatif and commit the result.
     *
     * Only the latest issued request may commit; responses to superseded
     * requests resolve false and change nothing. Returns whether this
     * call's response was applied.
     */
    async applyPerturbation(p: Perturbation): Promise<boolean> {
        const id = ++this.seq;
        this.pending = true;
        const before = this.snapshot();
        try {
            const res = await this.api.whatIf(this.state, p);
            if (id !== this.seq) {
                return false;
            }
            this.pushHistory(before);
            this.state = res.perturbed_state;
            this.live = res.perturbed;
            this.lastDelta = res.delta;
            this.expectedEndLine = res.expected_end_line;
            this.heatmap = null;
            return true;
        } catch (err) {
            if (id === this.seq) {
                this.toast(err instanceof Error ? err.message : String(err));
            }
            return false;
        } finally {
            if (id === this.seq) {
                this.pending = false;
            }
        }
    }

    dragPlayer(playerId: string, coords: number[]): Promise<boolean> {
        return this.applyPerturbation({
            player_id: playerId,
            kind: "set_position",
            coords,
        });
    }

    setAttribute(playerId: string, attribute: string,
                 value: number | boolean): Promise<boolean> {
        return this.applyPerturbation({
            player_id: playerId,
            kind: "set_attribute",
            attribute,
            value,
        });
    }

    /** Sample a player's alternative positions on an nx by ny grid. */
    async runSweep(playerId: string,
                   grid: { nx: number; ny: number }): Promise<boolean> {
        if (grid.nx * grid.ny > MAX_SWEEP_CELLS) {
            this.toast(`grid too dense: limit is ${MAX_SWEEP_CELLS} cells`);
            return false;
        }
        try {
            this.heatmap = await this.api.sweep(this.state, playerId, grid);
            return true;
        } catch (err) {
            this.toast(err instanceof Error ? err.message : String(err));
            return false;
        }
    }

    /** Same as runSweep but with explicit cell coordinates. */
    async runSweepCells(playerId: string,
                        cells: number[][]): Promise<boolean> {
        if (cells.length > MAX_SWEEP_CELLS) {
            this.toast(`too many cells: limit is ${MAX_SWEEP_CELLS}`);
            return false;
        }
        try {
            this.heatmap = await this.api.sweepCells(this.state, playerId, cells);
            return true;
        } catch (err) {
            this.toast(err instanceof Error ? err.message : String(err));
            return false;
        }
    }

    /** Move the swept player onto one of the heatmap cells. */
    applyCell(cell: { coords: number[] }): Promise<boolean> {
        if (!this.heatmap) {
            return Promise.resolve(false);
        }
        return this.dragPlayer(this.heatmap.player_id, cell.coords);
    }

    /**
     * Restore the board to just before the last committed mutation,
     * display included; no service call involved.
     */
    undo(): boolean {
        const prev = this.history.pop();
        if (!prev) {
            return false;
        }
        this.seq += 1;      // invalidate anything still in flight
        this.pending = false;
        this.state = prev.state;
        this.live = prev.live;
        this.lastDelta = prev.lastDelta;
        this.expectedEndLine = prev.expectedEndLine;
        this.heatmap = null;
        return true;
    }

    private snapshot(): Snapshot {
        return {
            state: deepCopy(this.state),
            live: this.live,
            lastDelta: this.lastDelta,
            expectedEndLine: this.expectedEndLine,
        };
    }

    private pushHistory(entry: Snapshot): void {
        this.history.push(entry);
        if (this.history.length > this.maxHistory) {
            this.history.shift();
        }
    }
}
