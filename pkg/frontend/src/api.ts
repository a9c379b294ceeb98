/** Typed client for the scoring service HTTP API. */

export interface SessionSummary {
    session_id: string;
    name: string;
    created_at: string;
    n_items: number;
    scored_by: Record<string, number>;
}

export interface PendingItem {
    done: false;
    item_id: string;
    source: string;
    reference: string;
    hypothesis: string;
}

export type NextItem = PendingItem | { done: true };

export interface ItemAggregate {
    mean: number;
    n_annotators: number;
}

export interface Aggregate {
    per_item: Record<string, ItemAggregate>;
    corpus_cms: number | null;
    coverage: number;
}

export class ApiError extends Error {
    constructor(readonly status: number, detail: string) {
        super(detail);
    }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

async function errorDetail(response: Response): Promise<string> {
    try {
        const body = await response.json();
        if (body && typeof body.detail === "string") {
            return body.detail;
        }
    } catch {
        // non-JSON error body; fall back to the status line
    }
    return `request failed with status ${response.status}`;
}

export class CmsApi {
    constructor(
        private readonly baseUrl: string = "",
        private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
    ) {}

    private async request(path: string, init?: RequestInit): Promise<Response> {
        let response: Response;
        try {
            response = await this.fetchFn(this.baseUrl + path, init);
        } catch {
            throw new ApiError(0, "cannot reach the scoring service");
        }
        if (!response.ok) {
            throw new ApiError(response.status, await errorDetail(response));
        }
        return response;
    }

    private async getJson<T>(path: string): Promise<T> {
        const response = await this.request(path);
        return response.json() as Promise<T>;
    }

    getSession(sessionId: string): Promise<SessionSummary> {
        return this.getJson(`/api/sessions/${encodeURIComponent(sessionId)}`);
    }

    getNext(sessionId: string, annotator: string): Promise<NextItem> {
        const query = new URLSearchParams({ annotator });
        return this.getJson(
            `/api/sessions/${encodeURIComponent(sessionId)}/next?${query}`,
        );
    }

    async submitScore(
        sessionId: string,
        annotator: string,
        itemId: string,
        value: number,
    ): Promise<void> {
        await this.request(
            `/api/sessions/${encodeURIComponent(sessionId)}/scores`,
            {
                method: "POST",
                headers: { "Content-Type": "application/json" },
                body: JSON.stringify({ annotator, item_id: itemId, value }),
            },
        );
    }

    getAggregate(sessionId: string): Promise<Aggregate> {
        return this.getJson(
            `/api/sessions/${encodeURIComponent(sessionId)}/aggregate`,
        );
    }
}
