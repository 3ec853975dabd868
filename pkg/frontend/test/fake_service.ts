/**
 * In-memory stand-in for the annotation service, exposed as a fetch
 * function. It enforces the same request/annotation alternation as the
 * real server: one probe is issued at a time, a POST for anything but the
 * issued probe is a 409, and an accepted annotation consumes it.
 */

import type { RankedCandidate, SessionStats } from "../src/types.js";

export interface QuerySpec {
    probe: number;
    ranked: RankedCandidate[];
}

export interface FakeServiceOptions {
    queries: QuerySpec[];
    budget?: number;
    /** Awaited before each annotate POST is handled; lets a test hold a request in flight. */
    gate?: () => Promise<void>;
}

/** Build a ranked list from gallery indices; distances ascend with position. */
export function candidates(...indices: number[]): RankedCandidate[] {
    return indices.map((index, position) => ({
        index,
        distance: 0.1 * (position + 1),
        rank: position + 1,
        thumbnail: null,
    }));
}

function json(status: number, body: unknown): Response {
    return new Response(JSON.stringify(body), {
        status,
        headers: { "Content-Type": "application/json" },
    });
}

export class FakeService {
    readonly requests: string[] = [];
    readonly accepted: Array<{ probe: number; gallery: number }> = [];
    readonly skipped: number[] = [];
    readonly rankHistory: number[] = [];
    pending: QuerySpec | null = null;
    budget: number;
    budgetLeft: number;
    /** Fail this many upcoming fetches with a network error. */
    failNextFetches = 0;
    /** Answer the next annotate POST with a 409 and drop the issued probe. */
    conflictNextAnnotate = false;
    private readonly queries: QuerySpec[];
    private cursor = 0;
    private readonly gate?: () => Promise<void>;

    constructor(options: FakeServiceOptions) {
        this.queries = options.queries;
        this.budget = options.budget ?? options.queries.length;
        this.budgetLeft = this.budget;
        this.gate = options.gate;
    }

    get complete(): boolean {
        return this.budgetLeft <= 0 || (this.pending === null && this.cursor >= this.queries.length);
    }

    /** Number of POSTs to the annotate endpoint seen so far. */
    get annotatePosts(): number {
        return this.requests.filter((r) => r === "POST /api/session/annotate").length;
    }

    fetch = async (input: RequestInfo | URL, init?: RequestInit): Promise<Response> => {
        const url =
            typeof input === "string" ? input : input instanceof URL ? input.href : input.url;
        const method = init?.method ?? "GET";
        const path = url.replace(/^https?:\/\/[^/]+/, "");
        this.requests.push(`${method} ${path}`);
        if (this.failNextFetches > 0) {
            this.failNextFetches -= 1;
            throw new TypeError("fetch failed");
        }
        if (method === "GET" && path === "/api/session/state") {
            return json(200, this.stateBody());
        }
        if (method === "GET" && path === "/api/session/next") {
            return json(200, this.nextBody());
        }
        if (method === "POST" && path === "/api/session/annotate") {
            const payload = JSON.parse(String(init?.body ?? "null")) as Record<string, unknown>;
            return this.annotate(payload);
        }
        return json(404, { error: `unknown path ${path}` });
    };

    private stats(): SessionStats {
        const ranks = this.rankHistory;
        const mean =
            ranks.length > 0 ? ranks.reduce((a, b) => a + b, 0) / ranks.length : null;
        return {
            annotations: this.accepted.length,
            skipped: this.skipped.length,
            mean_true_match_rank: mean,
            rank_history: [...ranks],
        };
    }

    private stateBody(): unknown {
        return {
            complete: this.complete,
            step: this.accepted.length + 1,
            budget: this.budget,
            budget_left: this.budgetLeft,
            annotations_done: this.accepted.length,
            strategy: "joint",
            probe_pool_size: this.queries.length - this.cursor,
            gallery_pool_size: 40,
            pending_probe: this.pending === null ? null : this.pending.probe,
            config: {},
            dataset: { name: "fake", d: 8, n: 64 },
            stats: this.stats(),
        };
    }

    private nextBody(): unknown {
        if (this.complete) {
            return { complete: true, stats: this.stats() };
        }
        if (this.pending === null) {
            this.pending = this.queries[this.cursor] ?? null;
            this.cursor += 1;
        }
        const query = this.pending;
        if (query === null) {
            return { complete: true, stats: this.stats() };
        }
        return {
            complete: false,
            step: this.accepted.length + 1,
            budget_left: this.budgetLeft,
            strategy: "joint",
            probe: { index: query.probe, thumbnail: null },
            ranked: query.ranked,
            scores: { epsilon1: 0.5, epsilon2: 0.25, epsilon3: 0.25 },
        };
    }

    private async annotate(payload: Record<string, unknown>): Promise<Response> {
        if (this.gate !== undefined) {
            await this.gate();
        }
        if (this.conflictNextAnnotate) {
            this.conflictNextAnnotate = false;
            this.pending = null;
            return json(409, { error: "probe is no longer the issued probe" });
        }
        const probe = payload["probe_index"];
        if (typeof probe !== "number") {
            return json(400, { error: "probe_index (int) is required" });
        }
        if (this.pending === null || probe !== this.pending.probe) {
            return json(409, { error: `probe ${probe} is not the issued probe` });
        }
        if (payload["skip"] === true) {
            this.skipped.push(probe);
            this.pending = null;
            return json(200, {
                updated: false,
                skipped: true,
                budget_left: this.budgetLeft,
                complete: this.complete,
            });
        }
        const gallery = payload["gallery_index"];
        if (typeof gallery !== "number") {
            return json(400, { error: "gallery_index (int) is required" });
        }
        const hit = this.pending.ranked.find((c) => c.index === gallery);
        if (hit === undefined) {
            return json(409, { error: `gallery sample ${gallery} is not in the pool` });
        }
        this.accepted.push({ probe, gallery });
        this.rankHistory.push(hit.rank);
        this.pending = null;
        this.budgetLeft -= 1;
        return json(200, {
            updated: true,
            step: this.accepted.length,
            true_match_rank: hit.rank,
            budget_left: this.budgetLeft,
            complete: this.complete,
        });
    }
}
