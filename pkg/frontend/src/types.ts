/**
 * Wire types for the annotation service HTTP API.
 *
 * Field names mirror the JSON payloads exactly (snake_case) so the client
 * performs no renaming or reshaping between the network and the views.
 */

/** Lifetime counters reported by the service alongside state and completion. */
export interface SessionStats {
    annotations: number;
    skipped: number;
    /** Mean rank of the true match across accepted annotations, null before the first one. */
    mean_true_match_rank: number | null;
    /** True-match rank of each accepted annotation, in acceptance order. */
    rank_history: number[];
}

/** Identity of the feature set the session runs on. */
export interface DatasetInfo {
    name: string;
    d: number;
    n: number;
}

/** Response of GET /api/session/state. */
export interface SessionState {
    complete: boolean;
    step: number;
    budget: number;
    budget_left: number;
    annotations_done: number;
    strategy: string;
    probe_pool_size: number;
    gallery_pool_size: number;
    /** Index of the currently issued probe, null when none is outstanding. */
    pending_probe: number | null;
    config: Record<string, unknown>;
    dataset: DatasetInfo;
    stats: SessionStats;
}

/** Probe descriptor inside a pending query. */
export interface ProbeView {
    index: number;
    /** Server-relative thumbnail URL, null when the service has no images. */
    thumbnail: string | null;
}

/** One gallery candidate, already ranked by the server. */
export interface RankedCandidate {
    index: number;
    distance: number;
    /** 1-based position in the server's ranking. */
    rank: number;
    thumbnail: string | null;
}

/** Selection scores the service reports for the issued probe. */
export interface CriterionScores {
    epsilon1: number;
    epsilon2: number;
    epsilon3: number;
}

/** Response of GET /api/session/next while annotations remain to be made. */
export interface PendingQuery {
    complete: false;
    step: number;
    budget_left: number;
    strategy: string;
    probe: ProbeView;
    /** Candidates in the server's ranked order; the display must preserve it. */
    ranked: RankedCandidate[];
    scores: CriterionScores;
}

/** Response of GET /api/session/next once the session has finished. */
export interface SessionComplete {
    complete: true;
    stats: SessionStats;
}

export type NextResponse = PendingQuery | SessionComplete;

/** 200 response to POST /api/session/annotate with a gallery pick. */
export interface AnnotationAccepted {
    updated: true;
    step: number;
    true_match_rank: number;
    budget_left: number;
    complete: boolean;
}

/** 200 response to POST /api/session/annotate with {"skip": true}. */
export interface SkipAccepted {
    updated: false;
    skipped: true;
    budget_left: number;
    complete: boolean;
}
