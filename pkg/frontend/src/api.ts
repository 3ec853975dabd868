/**
 * Typed fetch client for the annotation service.
 *
 * One method per endpoint; every non-2xx response becomes an ApiError
 * carrying the HTTP status so callers can treat a 409 (stale or duplicate
 * submission) differently from a transport failure.
 */

import type {
    AnnotationAccepted,
    NextResponse,
    SessionState,
    SkipAccepted,
} from "./types.js";

/** Error for a response the service answered with a non-2xx status. */
export class ApiError extends Error {
    readonly status: number;

    constructor(status: number, message: string) {
        super(message);
        this.name = "ApiError";
        this.status = status;
    }
}

/** True when the service rejected a submission as stale or duplicate. */
export function isConflict(error: unknown): boolean {
    return error instanceof ApiError && error.status === 409;
}

/** Client for the session endpoints of one annotation service. */
export class AnnotationApi {
    /** Service origin, e.g. "http://localhost:8765"; "" targets the page's own origin. */
    readonly baseUrl: string;

    constructor(baseUrl: string = "") {
        this.baseUrl = baseUrl.replace(/\/$/, "");
    }

    /** Resolve a server-relative path (such as a thumbnail URL) against the service. */
    resolve(path: string): string {
        return this.baseUrl + path;
    }

    /** Fetch the session snapshot: budget, pools, pending probe, stats. */
    state(): Promise<SessionState> {
        return this.request<SessionState>("GET", "/api/session/state");
    }

    /** Fetch the pending probe with its ranked gallery, or the completion notice. */
    next(): Promise<NextResponse> {
        return this.request<NextResponse>("GET", "/api/session/next");
    }

    /** Submit a gallery pick for the issued probe. */
    annotate(probeIndex: number, galleryIndex: number): Promise<AnnotationAccepted> {
        return this.request<AnnotationAccepted>("POST", "/api/session/annotate", {
            probe_index: probeIndex,
            gallery_index: galleryIndex,
        });
    }

    /** Discard the issued probe without spending budget. */
    skip(probeIndex: number): Promise<SkipAccepted> {
        return this.request<SkipAccepted>("POST", "/api/session/annotate", {
            probe_index: probeIndex,
            skip: true,
        });
    }

    private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
        const init: RequestInit = {
            method,
            headers: { Accept: "application/json" },
        };
        if (body !== undefined) {
            init.headers = { ...init.headers, "Content-Type": "application/json" };
            init.body = JSON.stringify(body);
        }
        const response = await fetch(this.baseUrl + path, init);
        const text = await response.text();
        let parsed: unknown = null;
        if (text !== "") {
            try {
                parsed = JSON.parse(text);
            } catch {
                parsed = null;
            }
        }
        if (!response.ok) {
            const detail =
                parsed !== null && typeof (parsed as { error?: unknown }).error === "string"
                    ? (parsed as { error: string }).error
                    : `${response.status} ${response.statusText}`;
            throw new ApiError(response.status, detail);
        }
        return parsed as T;
    }
}
