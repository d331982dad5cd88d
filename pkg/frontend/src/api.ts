// Typed client for the playgraph service. Field names mirror API.md;
// the board never computes predictions itself, every number shown comes
// through one of these calls.

export interface PlayerDoc {
    player_id: string;
    team: string;
    position: number[];
    velocity?: number;
    displacement?: number;
    alive?: boolean;
    is_ball_carrier?: boolean;
    hp?: number;
    armor?: number;
    equipment_value?: number;
    grenades?: number;
    has_helmet?: boolean;
    has_defuse_kit?: boolean;
    zone_id?: number;
}

export interface StateDoc {
    t: number;
    global: number[];
    players: PlayerDoc[];
    outcome: number | null;
    partition_key: string;
}

export interface Prediction {
    schema_version: string;
    value: number;
    attention: number[][][] | null;
    node_order: string[];
}

export interface Perturbation {
    player_id: string;
    kind: "set_position" | "circle_move" | "set_attribute";
    coords?: number[];
    anchor_id?: string;
    angle?: number;
    attribute?: string;
    value?: number | boolean;
}

export interface WhatIfResult {
    schema_version: string;
    baseline: Prediction;
    perturbed: Prediction;
    delta: number;
    expected_end_line: number | null;
    perturbed_state: StateDoc;
}

export interface SweepCell {
    coords: number[];
    value: number;
    delta: number;
}

export interface SweepResult {
    schema_version: string;
    player_id: string;
    baseline_value: number;
    cells: SweepCell[];
}

export interface FeatureSchemaDoc {
    entries: { name: string; unit: string; mean: number; std: number }[];
}

export interface ModelInfo {
    schema_version: string;
    spec: Record<string, unknown>;
    task: string;
    node_schema: FeatureSchemaDoc | null;
    state_schema: FeatureSchemaDoc | null;
}

export class ServiceError extends Error {
    constructor(readonly status: number, message: string) {
        super(message);
    }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

const defaultBase =
    (typeof process !== "undefined" && process.env?.PLAYGRAPH_URL) ||
    "http://127.0.0.1:8210";

export class ApiClient {
    constructor(
        readonly baseUrl: string = defaultBase,
        private readonly fetchFn: FetchLike = (u, i) => fetch(u, i),
    ) {}

    private async request<T>(path: string, body?: unknown): Promise<T> {
        const init: RequestInit = body === undefined
            ? { method: "GET" }
            : {
                method: "POST",
                headers: { "Content-Type": "application/json" },
                body: JSON.stringify(body),
            };
        const resp = await this.fetchFn(this.baseUrl + path, init);
        const doc = await resp.json();
        if (!resp.ok) {
            throw new ServiceError(resp.status, doc.error ?? resp.statusText);
        }
        return doc as T;
    }

    health(): Promise<{ status: string }> {
        return this.request("/health");
    }

    modelInfo(): Promise<ModelInfo> {
        return this.request("/model/info");
    }

    predict(state: StateDoc): Promise<Prediction> {
        return this.request("/predict", { state });
    }

    whatIf(state: StateDoc, perturbation: Perturbation): Promise<WhatIfResult> {
        return this.request("/whatif", { state, perturbation });
    }

    sweep(state: StateDoc, playerId: string,
          grid: { nx: number; ny: number }): Promise<SweepResult> {
        return this.request("/sweep", { state, player_id: playerId, grid });
    }

    sweepCells(state: StateDoc, playerId: string,
               cells: number[][]): Promise<SweepResult> {
        return this.request("/sweep", { state, player_id: playerId, cells });
    }
}
