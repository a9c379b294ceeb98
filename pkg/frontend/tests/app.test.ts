import { beforeEach, describe, expect, it } from "vitest";

import { CmsApi } from "../src/api";
import { CmsApp, parseScoreField } from "../src/app";
import { FakeService, sixItems } from "./fake-service";

function q<T extends HTMLElement>(selector: string): T {
    const el = document.querySelector<T>(selector);
    if (el === null) {
        throw new Error(`missing element ${selector}`);
    }
    return el;
}

function maybe(selector: string): HTMLElement | null {
    return document.querySelector<HTMLElement>(selector);
}

async function until(predicate: () => boolean, ms = 2000): Promise<void> {
    const start = Date.now();
    while (!predicate()) {
        if (Date.now() - start > ms) {
            throw new Error("condition not reached in time");
        }
        await new Promise((resolve) => setTimeout(resolve, 5));
    }
}

function mount(service: FakeService): CmsApp {
    document.body.innerHTML = '<div id="app"></div>';
    return new CmsApp(q("#app"), new CmsApi("", service.fetch));
}

function pickSlider(value: number): void {
    const slider = q<HTMLInputElement>("#score-slider");
    slider.value = String(value);
    slider.dispatchEvent(new Event("input", { bubbles: true }));
}

function typeScore(text: string): void {
    const field = q<HTMLInputElement>("#score-field");
    field.value = text;
    field.dispatchEvent(new Event("input", { bubbles: true }));
}

async function submitAndSettle(): Promise<void> {
    q<HTMLButtonElement>("#submit-button").click();
    // settled states: completion screen, error banner, or a fresh item
    // with the score selection cleared
    await until(() => maybe("#submit-button") === null
        || maybe("#error-banner") !== null
        || q<HTMLInputElement>("#score-field").value === "");
}

let service: FakeService;

beforeEach(() => {
    service = new FakeService();
    service.createSession("s1", "table-4", sixItems());
});

describe("join view", () => {
    it("loads the first pending item with zero progress", async () => {
        const app = mount(service);
        await app.start("s1", "judge");
        expect(q("#progress").textContent).toBe("0 / 6");
        expect(q("#item-id").textContent).toBe("0");
        expect(q("#source-text").textContent).toBe("fon 0");
        expect(q("#reference-text").textContent).toBe("fr 0");
        expect(q("#hypothesis-text").textContent).toBe("hyp 0");
    });

    it("submits through the form controls", async () => {
        mount(service);
        q<HTMLInputElement>("#session-field").value = "s1";
        q<HTMLInputElement>("#annotator-field").value = "judge";
        q<HTMLFormElement>("#join-form").dispatchEvent(
            new Event("submit", { bubbles: true, cancelable: true }));
        await until(() => maybe("#item-id") !== null);
        expect(q("#progress").textContent).toBe("0 / 6");
    });

    it("shows a retryable banner for an unknown session", async () => {
        const app = mount(service);
        await app.start("ghost", "judge");
        expect(q("#error-banner").textContent).toContain("unknown session");
        // the operator creates the session; retry then succeeds
        service.createSession("ghost", "late", sixItems());
        q("#retry-button").click();
        await until(() => maybe("#item-id") !== null);
        expect(q("#progress").textContent).toBe("0 / 6");
    });

    it("rejects blank inputs without calling the service", async () => {
        const app = mount(service);
        await app.start("  ", "judge");
        expect(q("#error-banner").textContent).toContain("required");
        expect(service.served.length).toBe(0);
    });
});

describe("scoring flow", () => {
    it("keeps submit disabled until a score is picked", async () => {
        const app = mount(service);
        await app.start("s1", "judge");
        expect(q<HTMLButtonElement>("#submit-button").disabled).toBe(true);
        pickSlider(0.65);
        expect(q<HTMLButtonElement>("#submit-button").disabled).toBe(false);
        expect(q<HTMLInputElement>("#score-field").value).toBe("0.65");
    });

    it("accepts typed scores and mirrors them on the slider", async () => {
        const app = mount(service);
        await app.start("s1", "judge");
        typeScore("0.9");
        expect(q<HTMLButtonElement>("#submit-button").disabled).toBe(false);
        expect(q<HTMLInputElement>("#score-slider").value).toBe("0.9");
    });

    it("treats out-of-range typed values as no selection", async () => {
        const app = mount(service);
        await app.start("s1", "judge");
        typeScore("1.5");
        expect(q<HTMLButtonElement>("#submit-button").disabled).toBe(true);
        typeScore("-0.2");
        expect(q<HTMLButtonElement>("#submit-button").disabled).toBe(true);
        typeScore("0.25");
        expect(q<HTMLButtonElement>("#submit-button").disabled).toBe(false);
    });

    it("walks all six items and lands on the completion screen", async () => {
        const app = mount(service);
        await app.start("s1", "judge");
        const values = [0.9, 0.65, 0.3, 0.0, 1.0, 0.55];
        for (let i = 0; i < values.length; i += 1) {
            expect(q("#progress").textContent).toBe(`${i} / 6`);
            expect(q("#item-id").textContent).toBe(String(i));
            pickSlider(values[i] as number);
            await submitAndSettle();
        }
        expect(q("#done-message").textContent).toContain("All items scored");
        expect(q("#progress").textContent).toBe("6 / 6");
        expect(service.scorePosts.map((p) => p.value)).toEqual(values);
    });

    it("submits an exact zero from the slider's low end", async () => {
        const app = mount(service);
        await app.start("s1", "judge");
        pickSlider(0);
        await submitAndSettle();
        expect(service.scorePosts[0]?.value).toBe(0);
    });

    it("allows only one score request in flight", async () => {
        const app = mount(service);
        await app.start("s1", "judge");
        pickSlider(0.5);
        let release: () => void = () => undefined;
        service.gate = new Promise((resolve) => {
            release = resolve;
        });
        const submit = q<HTMLButtonElement>("#submit-button");
        submit.click();
        await until(() => q<HTMLButtonElement>("#submit-button").disabled);
        q<HTMLButtonElement>("#submit-button").click();
        q<HTMLButtonElement>("#submit-button").click();
        release();
        await until(() => maybe("#item-id")?.textContent === "1");
        expect(service.scorePosts.length).toBe(1);
    });

    it("keeps the item and score after a failed submit", async () => {
        const app = mount(service);
        await app.start("s1", "judge");
        pickSlider(0.65);
        service.failNextStatus = 500;
        await submitAndSettle();
        expect(q("#error-banner").textContent).toContain("injected failure");
        expect(q("#item-id").textContent).toBe("0");
        expect(q<HTMLInputElement>("#score-field").value).toBe("0.65");
        // submit doubles as the retry control
        await submitAndSettle();
        expect(maybe("#error-banner")).toBeNull();
        expect(q("#item-id").textContent).toBe("1");
    });

    it("keeps the item after a network drop", async () => {
        const app = mount(service);
        await app.start("s1", "judge");
        pickSlider(0.4);
        service.failNextNetwork = true;
        q<HTMLButtonElement>("#submit-button").click();
        await until(() => maybe("#error-banner") !== null);
        expect(q("#error-banner").textContent)
            .toContain("cannot reach the scoring service");
        expect(q("#item-id").textContent).toBe("0");
    });
});

describe("aggregate view", () => {
    async function scoreEverything(app: CmsApp,
                                   values: number[]): Promise<void> {
        await app.start("s1", "judge");
        for (const value of values) {
            pickSlider(value);
            await submitAndSettle();
        }
    }

    it("shows exactly the service's means, to two decimals", async () => {
        const app = mount(service);
        await scoreEverything(app, [0.9, 0.65, 0.3, 0.0, 1.0, 0.55]);
        q("#aggregate-link").click();
        await until(() => maybe("#aggregate-table") !== null);
        const aggregate = service.served[service.served.length - 1] as {
            per_item: Record<string, { mean: number; n_annotators: number }>;
            corpus_cms: number;
            coverage: number;
        };
        const rows = document.querySelectorAll("#aggregate-table tbody tr");
        expect(rows.length).toBe(6);
        rows.forEach((row) => {
            const [id, mean, n] = Array.from(row.children)
                .map((cell) => cell.textContent);
            const entry = aggregate.per_item[id as string];
            expect(entry).toBeDefined();
            expect(mean).toBe(entry?.mean.toFixed(2));
            expect(n).toBe(String(entry?.n_annotators));
        });
        expect(q("#corpus-cms").textContent)
            .toBe(aggregate.corpus_cms.toFixed(2));
        expect(q("#coverage").textContent).toBe(aggregate.coverage.toFixed(2));
    });

    it("shows a placeholder when nothing is scored yet", async () => {
        const app = mount(service);
        await app.start("s1", "judge");
        q("#aggregate-link").click();
        await until(() => maybe("#no-scores") !== null);
        expect(q("#no-scores").textContent).toContain("No scores yet");
    });

    it("re-renders identically on refresh when data is unchanged",
       async () => {
        const app = mount(service);
        await scoreEverything(app, [0.9, 0.65, 0.3, 0.0, 1.0, 0.55]);
        q("#aggregate-link").click();
        await until(() => maybe("#aggregate-table") !== null);
        const before = q("#app").innerHTML;
        const calls = service.served.length;
        q("#refresh-button").click();
        await until(() => service.served.length > calls);
        await until(() => maybe("#aggregate-table") !== null);
        expect(q("#app").innerHTML).toBe(before);
    });

    it("returns to the pending item from the aggregate view", async () => {
        const app = mount(service);
        await app.start("s1", "judge");
        pickSlider(0.9);
        await submitAndSettle();
        q("#aggregate-link").click();
        await until(() => maybe("#no-scores") !== null
            || maybe("#aggregate-table") !== null);
        q("#back-button").click();
        await until(() => maybe("#item-id") !== null);
        expect(q("#item-id").textContent).toBe("1");
        expect(q("#progress").textContent).toBe("1 / 6");
    });
});

describe("score field parsing", () => {
    it("accepts the documented range at two decimals", () => {
        expect(parseScoreField("0")).toBe(0);
        expect(parseScoreField("1")).toBe(1);
        expect(parseScoreField("0.65")).toBe(0.65);
        expect(parseScoreField("0.654")).toBe(0.65);
        expect(parseScoreField("")).toBeNull();
        expect(parseScoreField("1.01")).toBeNull();
        expect(parseScoreField("-0.01")).toBeNull();
        expect(parseScoreField("abc")).toBeNull();
    });
});
