/**
 * DOM builders for the annotation console.
 *
 * Every view is rebuilt from the latest server payload. Nothing here
 * reorders, re-sorts, or filters what the service returned: the candidate
 * grid iterates the ranked array in payload order, so the display order is
 * the server's ranking by construction.
 */

import type { PendingQuery, RankedCandidate, SessionStats } from "./types.js";

/** Maps a server-relative path (thumbnail URL) to an absolute one. */
export type PathResolver = (path: string) => string;

/** Format a gallery distance for display. */
export function formatDistance(distance: number): string {
    return distance.toFixed(4);
}

/** Format a mean rank with two decimals, or a dash before any annotation. */
export function formatMeanRank(value: number | null): string {
    return value === null ? "–" : value.toFixed(2);
}

function element<K extends keyof HTMLElementTagNameMap>(
    tag: K,
    className?: string,
    text?: string,
): HTMLElementTagNameMap[K] {
    const node = document.createElement(tag);
    if (className !== undefined) {
        node.className = className;
    }
    if (text !== undefined) {
        node.textContent = text;
    }
    return node;
}

/** Thumbnail image when the service exposes one, index badge otherwise. */
function renderMedia(index: number, thumbnail: string | null, resolve: PathResolver): HTMLElement {
    if (thumbnail === null) {
        return element("div", "index-badge", `#${index}`);
    }
    const img = element("img", "thumb");
    img.src = resolve(thumbnail);
    img.alt = `sample ${index}`;
    return img;
}

/** One clickable gallery candidate card. */
export function renderCandidate(candidate: RankedCandidate, resolve: PathResolver): HTMLButtonElement {
    const card = element("button", "candidate");
    card.type = "button";
    card.dataset.index = String(candidate.index);
    card.append(
        element("span", "rank", String(candidate.rank)),
        renderMedia(candidate.index, candidate.thumbnail, resolve),
        element("span", "distance", formatDistance(candidate.distance)),
    );
    return card;
}

/**
 * The candidate grid. Cards appear in exactly the order of `ranked`, which
 * is the order the server returned; clicking a card reports its gallery
 * index to `onPick`.
 */
export function renderCandidateGrid(
    ranked: readonly RankedCandidate[],
    resolve: PathResolver,
    onPick: (galleryIndex: number) => void,
): HTMLElement {
    const grid = element("div", "candidates");
    for (const candidate of ranked) {
        const card = renderCandidate(candidate, resolve);
        card.addEventListener("click", () => onPick(candidate.index));
        grid.append(card);
    }
    return grid;
}

/** Header block for the issued probe: step, budget, strategy, skip control. */
export function renderProbePanel(
    view: PendingQuery,
    resolve: PathResolver,
    onSkip: () => void,
): HTMLElement {
    const panel = element("section", "probe-panel");
    panel.append(element("h2", undefined, `Step ${view.step}`));
    panel.append(
        element(
            "p",
            "meta",
            `budget left ${view.budget_left} · strategy ${view.strategy}` +
                ` · probe ${view.probe.index}`,
        ),
    );
    const media = renderMedia(view.probe.index, view.probe.thumbnail, resolve);
    media.classList.add("probe-media");
    panel.append(media);
    const skip = element("button", "skip", "Skip probe");
    skip.type = "button";
    skip.addEventListener("click", onSkip);
    panel.append(skip);
    return panel;
}

/** Progress panel: running counters plus the per-step true-match rank history. */
export function renderStatsPanel(stats: SessionStats): HTMLElement {
    const panel = element("aside", "stats-panel");
    panel.append(element("h2", undefined, "Progress"));
    const list = element("dl", "stats");
    const add = (label: string, value: string): void => {
        list.append(element("dt", undefined, label), element("dd", undefined, value));
    };
    add("annotations", String(stats.annotations));
    add("skipped", String(stats.skipped));
    add("mean true-match rank", formatMeanRank(stats.mean_true_match_rank));
    panel.append(list);
    panel.append(element("h3", undefined, "True-match rank per step"));
    const history = element("ol", "rank-history");
    for (const rank of stats.rank_history) {
        history.append(element("li", "rank-chip", String(rank)));
    }
    panel.append(history);
    return panel;
}

/** Terminal view once the budget is spent or the pools are empty. */
export function renderCompleteView(stats: SessionStats): HTMLElement {
    const panel = element("section", "complete-panel");
    panel.append(element("h2", undefined, "Session complete"));
    panel.append(
        element(
            "p",
            "summary",
            `${stats.annotations} annotations, ${stats.skipped} skipped, ` +
                `mean true-match rank ${formatMeanRank(stats.mean_true_match_rank)}`,
        ),
    );
    panel.append(renderStatsPanel(stats));
    return panel;
}

/** Dismissable failure banner with a retry control. */
export function renderErrorBanner(message: string, onRetry: () => void): HTMLElement {
    const banner = element("div", "error-banner");
    banner.append(element("span", "error-message", message));
    const retry = element("button", "retry", "Retry");
    retry.type = "button";
    retry.addEventListener("click", onRetry);
    banner.append(retry);
    return banner;
}
