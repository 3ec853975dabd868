/**
 * Interactive controller for one annotation session.
 *
 * The controller keeps no session state of its own beyond the last fetched
 * view: every render comes from a fresh server payload, so reloading the
 * page and calling start() resumes exactly where the service says the
 * session is. At most one request is in flight at a time; while one is
 * pending all inputs are disabled and further submissions are dropped.
 */

import { AnnotationApi, ApiError, isConflict } from "./api.js";
import {
    renderCandidateGrid,
    renderCompleteView,
    renderErrorBanner,
    renderProbePanel,
    renderStatsPanel,
} from "./render.js";
import type { PendingQuery, SessionStats } from "./types.js";

function describe(error: unknown): string {
    if (error instanceof ApiError) {
        return `service error: ${error.message}`;
    }
    if (error instanceof Error) {
        return `request failed: ${error.message}`;
    }
    return "request failed";
}

/** Drives the probe/candidate views of an annotation session inside `root`. */
export class AnnotationConsole {
    private readonly api: AnnotationApi;
    private readonly root: HTMLElement;
    private inFlight = false;
    private current: PendingQuery | null = null;
    private stats: SessionStats | null = null;

    constructor(api: AnnotationApi, root: HTMLElement) {
        this.api = api;
        this.root = root;
    }

    /** Load the live session and show the pending query or the final stats. */
    async start(): Promise<void> {
        await this.guarded(() => this.refresh());
    }

    /** Submit the picked gallery candidate for the probe on display. */
    async submit(galleryIndex: number): Promise<void> {
        const view = this.current;
        if (view === null) {
            return;
        }
        await this.guarded(async () => {
            await this.api.annotate(view.probe.index, galleryIndex);
            await this.refresh();
        });
    }

    /** Discard the probe on display without spending budget. */
    async skip(): Promise<void> {
        const view = this.current;
        if (view === null) {
            return;
        }
        await this.guarded(async () => {
            await this.api.skip(view.probe.index);
            await this.refresh();
        });
    }

    /** True while a request is in flight and inputs are disabled. */
    get busy(): boolean {
        return this.inFlight;
    }

    /** The query currently on display, if any. */
    get view(): PendingQuery | null {
        return this.current;
    }

    // ----- internals ------------------------------------------------------

    /**
     * Run one server interaction. A second call while one is in flight
     * returns immediately without issuing a request. A 409 means the
     * submission was stale (for example a repeat of one already accepted);
     * the server is authoritative, so the reaction is to re-fetch and
     * re-render rather than to mutate anything locally.
     */
    private async guarded(action: () => Promise<void>): Promise<void> {
        if (this.inFlight) {
            return;
        }
        this.inFlight = true;
        this.setBusy(true);
        try {
            await action();
        } catch (error) {
            if (isConflict(error)) {
                try {
                    await this.refresh();
                } catch (refreshError) {
                    this.showError(describe(refreshError));
                }
            } else {
                this.showError(describe(error));
            }
        } finally {
            this.inFlight = false;
            this.setBusy(false);
        }
    }

    /** Pull session state plus the pending query and render whichever applies. */
    private async refresh(): Promise<void> {
        const state = await this.api.state();
        this.stats = state.stats;
        if (state.complete) {
            this.current = null;
            this.renderComplete(state.stats);
            return;
        }
        const next = await this.api.next();
        if (next.complete) {
            this.stats = next.stats;
            this.current = null;
            this.renderComplete(next.stats);
            return;
        }
        this.current = next;
        this.renderQuery(next);
    }

    private renderQuery(view: PendingQuery): void {
        const resolve = (path: string): string => this.api.resolve(path);
        this.root.replaceChildren(
            renderProbePanel(view, resolve, () => {
                void this.skip();
            }),
            renderCandidateGrid(view.ranked, resolve, (galleryIndex) => {
                void this.submit(galleryIndex);
            }),
        );
        if (this.stats !== null) {
            this.root.append(renderStatsPanel(this.stats));
        }
    }

    private renderComplete(stats: SessionStats): void {
        this.current = null;
        this.root.replaceChildren(renderCompleteView(stats));
    }

    /** Show a failure banner above the last good view, which stays intact. */
    private showError(message: string): void {
        this.clearError();
        this.root.prepend(
            renderErrorBanner(message, () => {
                this.clearError();
                void this.start();
            }),
        );
    }

    private clearError(): void {
        this.root.querySelector(".error-banner")?.remove();
    }

    private setBusy(busy: boolean): void {
        this.root.classList.toggle("busy", busy);
        for (const button of this.root.querySelectorAll("button")) {
            button.disabled = busy;
        }
    }
}
