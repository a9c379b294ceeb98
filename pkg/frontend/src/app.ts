import {
    Aggregate,
    ApiError,
    CmsApi,
    PendingItem,
    SessionSummary,
} from "./api";

type View =
    | { kind: "join" }
    | { kind: "annotate"; summary: SessionSummary; item: PendingItem }
    | { kind: "done"; summary: SessionSummary }
    | { kind: "aggregate"; aggregate: Aggregate };

function describeError(err: unknown): string {
    if (err instanceof ApiError) {
        return err.status === 0
            ? err.message
            : `${err.message} (HTTP ${err.status})`;
    }
    return String(err);
}

/** Clamp-free parse of the numeric field: null unless a valid 0..1 value. */
export function parseScoreField(raw: string): number | null {
    if (raw.trim() === "") {
        return null;
    }
    const value = Number(raw);
    if (!Number.isFinite(value) || value < 0 || value > 1) {
        return null;
    }
    return Math.round(value * 100) / 100;
}

export class CmsApp {
    private view: View = { kind: "join" };
    private sessionId = "";
    private annotator = "";
    private score: number | null = null;
    private inFlight = false;
    private error: string | null = null;
    private retry: (() => void) | null = null;

    constructor(
        private readonly root: HTMLElement,
        private readonly api: CmsApi,
    ) {
        this.render();
    }

    // -- data flow -------------------------------------------------------

    async start(sessionId: string, annotator: string): Promise<void> {
        if (this.inFlight) {
            return;
        }
        this.sessionId = sessionId.trim();
        this.annotator = annotator.trim();
        if (!this.sessionId || !this.annotator) {
            this.error = "session id and annotator name are both required";
            this.retry = null;
            this.render();
            return;
        }
        this.inFlight = true;
        this.error = null;
        this.render();
        try {
            const summary = await this.api.getSession(this.sessionId);
            const next = await this.api.getNext(this.sessionId, this.annotator);
            this.score = null;
            this.view = next.done
                ? { kind: "done", summary }
                : { kind: "annotate", summary, item: next };
        } catch (err) {
            this.error = describeError(err);
            this.retry = () => void this.start(sessionId, annotator);
        } finally {
            this.inFlight = false;
            this.render();
        }
    }

    private async submit(): Promise<void> {
        if (this.view.kind !== "annotate" || this.score === null
                || this.inFlight) {
            return;
        }
        const item = this.view.item;
        this.inFlight = true;
        this.error = null;
        this.render();
        try {
            await this.api.submitScore(
                this.sessionId, this.annotator, item.item_id, this.score);
            // re-fetch so progress shows the server's count, not a guess
            const summary = await this.api.getSession(this.sessionId);
            const next = await this.api.getNext(this.sessionId, this.annotator);
            this.score = null;
            this.view = next.done
                ? { kind: "done", summary }
                : { kind: "annotate", summary, item: next };
        } catch (err) {
            // keep the item and the picked score; submit doubles as retry
            this.error = describeError(err);
        } finally {
            this.inFlight = false;
            this.render();
        }
    }

    private async openAggregate(): Promise<void> {
        if (this.inFlight) {
            return;
        }
        this.inFlight = true;
        this.error = null;
        this.render();
        try {
            const aggregate = await this.api.getAggregate(this.sessionId);
            this.view = { kind: "aggregate", aggregate };
        } catch (err) {
            this.error = describeError(err);
            this.retry = () => void this.openAggregate();
        } finally {
            this.inFlight = false;
            this.render();
        }
    }

    private leaveAggregate(): void {
        // lands back on the pending item or the completion screen
        void this.start(this.sessionId, this.annotator);
    }

    // -- rendering -------------------------------------------------------

    private progressOf(summary: SessionSummary): string {
        const scored = summary.scored_by[this.annotator] ?? 0;
        return `${scored} / ${summary.n_items}`;
    }

    private bannerHtml(): string {
        if (this.error === null) {
            return "";
        }
        const retry = this.retry === null
            ? ""
            : '<button id="retry-button" type="button">Retry</button>';
        return `<div id="error-banner" role="alert">
            <span id="error-text"></span>${retry}</div>`;
    }

    private wireBanner(): void {
        if (this.error === null) {
            return;
        }
        const text = this.root.querySelector<HTMLElement>("#error-text");
        if (text !== null) {
            text.textContent = this.error;
        }
        const retry = this.root.querySelector<HTMLElement>("#retry-button");
        if (retry !== null && this.retry !== null) {
            const action = this.retry;
            retry.addEventListener("click", () => {
                this.retry = null;
                action();
            });
        }
    }

    private render(): void {
        switch (this.view.kind) {
            case "join":
                this.renderJoin();
                break;
            case "annotate":
                this.renderAnnotate(this.view.summary, this.view.item);
                break;
            case "done":
                this.renderDone(this.view.summary);
                break;
            case "aggregate":
                this.renderAggregate(this.view.aggregate);
                break;
        }
        this.wireBanner();
    }

    private renderJoin(): void {
        this.root.innerHTML = `
            <h1>Translation scoring</h1>
            ${this.bannerHtml()}
            <form id="join-form">
                <label>Session id
                    <input id="session-field" type="text" autocomplete="off">
                </label>
                <label>Your name
                    <input id="annotator-field" type="text" autocomplete="off">
                </label>
                <button id="join-button" type="submit">Start scoring</button>
            </form>`;
        const form = this.root.querySelector<HTMLFormElement>("#join-form");
        const session = this.root.querySelector<HTMLInputElement>("#session-field");
        const name = this.root.querySelector<HTMLInputElement>("#annotator-field");
        const button = this.root.querySelector<HTMLButtonElement>("#join-button");
        if (form === null || session === null || name === null
                || button === null) {
            throw new Error("join view failed to mount");
        }
        session.value = this.sessionId;
        name.value = this.annotator;
        button.disabled = this.inFlight;
        form.addEventListener("submit", (event) => {
            event.preventDefault();
            void this.start(session.value, name.value);
        });
    }

    private renderAnnotate(summary: SessionSummary, item: PendingItem): void {
        this.root.innerHTML = `
            <header>
                <h1>Translation scoring</h1>
                <span id="progress"></span>
                <a id="aggregate-link" href="#">View aggregate</a>
            </header>
            ${this.bannerHtml()}
            <section id="item-card">
                <p>Item <span id="item-id"></span></p>
                <dl>
                    <dt>Source</dt><dd id="source-text"></dd>
                    <dt>Reference</dt><dd id="reference-text"></dd>
                    <dt>Prediction</dt><dd id="hypothesis-text"></dd>
                </dl>
            </section>
            <section id="score-card">
                <p>How similar in meaning is the prediction to the
                   reference, given the source? (0 = unrelated, 1 = same)</p>
                <input id="score-slider" type="range"
                       min="0" max="1" step="0.05">
                <input id="score-field" type="number"
                       min="0" max="1" step="0.01" placeholder="0.00">
                <button id="submit-button" type="button">Submit score</button>
            </section>`;
        const progress = this.root.querySelector<HTMLElement>("#progress");
        const itemId = this.root.querySelector<HTMLElement>("#item-id");
        const source = this.root.querySelector<HTMLElement>("#source-text");
        const reference = this.root.querySelector<HTMLElement>("#reference-text");
        const hypothesis = this.root.querySelector<HTMLElement>("#hypothesis-text");
        const slider = this.root.querySelector<HTMLInputElement>("#score-slider");
        const field = this.root.querySelector<HTMLInputElement>("#score-field");
        const submit = this.root.querySelector<HTMLButtonElement>("#submit-button");
        const aggregate = this.root.querySelector<HTMLElement>("#aggregate-link");
        if (progress === null || itemId === null || source === null
                || reference === null || hypothesis === null || slider === null
                || field === null || submit === null || aggregate === null) {
            throw new Error("annotate view failed to mount");
        }
        progress.textContent = this.progressOf(summary);
        itemId.textContent = item.item_id;
        source.textContent = item.source;
        reference.textContent = item.reference;
        hypothesis.textContent = item.hypothesis;

        // a failed submit re-renders with the picked score still active
        if (this.score !== null) {
            slider.value = String(this.score);
            field.value = this.score.toFixed(2);
        } else {
            slider.value = "0.5";  // visual start; counts only after input
            field.value = "";
        }
        const updateSubmit = () => {
            submit.disabled = this.score === null || this.inFlight;
        };
        updateSubmit();
        slider.addEventListener("input", () => {
            this.score = Number(slider.value);
            field.value = this.score.toFixed(2);
            updateSubmit();
        });
        field.addEventListener("input", () => {
            this.score = parseScoreField(field.value);
            if (this.score !== null) {
                slider.value = String(this.score);
            }
            updateSubmit();
        });
        submit.addEventListener("click", () => void this.submit());
        aggregate.addEventListener("click", (event) => {
            event.preventDefault();
            void this.openAggregate();
        });
    }

    private renderDone(summary: SessionSummary): void {
        this.root.innerHTML = `
            <h1>Translation scoring</h1>
            ${this.bannerHtml()}
            <section id="done-card">
                <p id="done-message">All items scored. Thank you!</p>
                <p>Progress: <span id="progress"></span></p>
                <a id="aggregate-link" href="#">View aggregate</a>
            </section>`;
        const progress = this.root.querySelector<HTMLElement>("#progress");
        const aggregate = this.root.querySelector<HTMLElement>("#aggregate-link");
        if (progress === null || aggregate === null) {
            throw new Error("completion view failed to mount");
        }
        progress.textContent = this.progressOf(summary);
        aggregate.addEventListener("click", (event) => {
            event.preventDefault();
            void this.openAggregate();
        });
    }

    private renderAggregate(aggregate: Aggregate): void {
        const entries = Object.entries(aggregate.per_item);
        const body = entries.length === 0
            ? '<p id="no-scores">No scores yet.</p>'
            : `<table id="aggregate-table">
                <thead><tr><th>Item</th><th>CMS</th><th>Annotators</th></tr></thead>
                <tbody></tbody>
               </table>
               <p>Corpus CMS: <span id="corpus-cms"></span></p>
               <p>Coverage: <span id="coverage"></span></p>`;
        this.root.innerHTML = `
            <header>
                <h1>Session aggregate</h1>
                <button id="refresh-button" type="button">Refresh</button>
                <a id="back-button" href="#">Back to scoring</a>
            </header>
            ${this.bannerHtml()}
            ${body}`;
        if (entries.length > 0) {
            const tbody = this.root.querySelector("#aggregate-table tbody");
            const corpus = this.root.querySelector<HTMLElement>("#corpus-cms");
            const coverage = this.root.querySelector<HTMLElement>("#coverage");
            if (tbody === null || corpus === null || coverage === null) {
                throw new Error("aggregate view failed to mount");
            }
            for (const [id, entry] of entries) {
                const row = document.createElement("tr");
                for (const text of [
                    id, entry.mean.toFixed(2), String(entry.n_annotators),
                ]) {
                    const cell = document.createElement("td");
                    cell.textContent = text;
                    row.appendChild(cell);
                }
                tbody.appendChild(row);
            }
            corpus.textContent = aggregate.corpus_cms === null
                ? "-" : aggregate.corpus_cms.toFixed(2);
            coverage.textContent = aggregate.coverage.toFixed(2);
        }
        const refresh = this.root.querySelector<HTMLElement>("#refresh-button");
        const back = this.root.querySelector<HTMLElement>("#back-button");
        if (refresh === null || back === null) {
            throw new Error("aggregate view failed to mount");
        }
        refresh.addEventListener("click", () => void this.openAggregate());
        back.addEventListener("click", (event) => {
            event.preventDefault();
            this.leaveAggregate();
        });
    }
}
