/** Drives the real scoring service end to end: boots `cms-serve`,
 * creates a six-item session over HTTP, scores it through the DOM, and
 * checks the aggregate view against the API's own numbers. */

import { ChildProcess, spawn } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { Aggregate, CmsApi } from "../src/api";
import { CmsApp } from "../src/app";

const PORT = 18340 + (process.pid % 127);
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcess;
let serverLog = "";

async function until(predicate: () => boolean, ms = 4000): Promise<void> {
    const start = Date.now();
    while (!predicate()) {
        if (Date.now() - start > ms) {
            throw new Error("condition not reached in time");
        }
        await new Promise((resolve) => setTimeout(resolve, 10));
    }
}

function q<T extends HTMLElement>(selector: string): T {
    const el = document.querySelector<T>(selector);
    if (el === null) {
        throw new Error(`missing element ${selector}`);
    }
    return el;
}

beforeAll(async () => {
    const dataDir = mkdtempSync(join(tmpdir(), "cms-ui-test-"));
    server = spawn(
        "python3",
        ["-m", "ffr.cli", "cms-serve", "--port", String(PORT),
         "--data-dir", dataDir],
        { stdio: ["ignore", "pipe", "pipe"] },
    );
    server.stderr?.on("data", (chunk: Buffer) => {
        serverLog += chunk.toString();
    });
    const deadline = Date.now() + 20000;
    for (;;) {
        try {
            await fetch(`${BASE}/api/sessions/warmup-probe`);
            break;
        } catch {
            if (Date.now() > deadline) {
                throw new Error(`service did not come up:\n${serverLog}`);
            }
            await new Promise((resolve) => setTimeout(resolve, 100));
        }
    }
});

afterAll(() => {
    server.kill();
});

describe("against the running service", () => {
    it("scores a six-item session and matches the API aggregate",
       async () => {
        const created = await fetch(`${BASE}/api/sessions`, {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify({
                name: "ui-e2e",
                items: Array.from({ length: 6 }, (_, i) => ({
                    item_id: String(i),
                    source: `fon ${i}`,
                    reference: `fr ${i}`,
                    hypothesis: `hyp ${i}`,
                })),
            }),
        });
        expect(created.status).toBe(201);
        const { session_id } = await created.json() as {
            session_id: string;
        };

        document.body.innerHTML = '<div id="app"></div>';
        const app = new CmsApp(q("#app"), new CmsApi(BASE));
        await app.start(session_id, "judge-1");
        expect(q("#progress").textContent).toBe("0 / 6");

        const values = [0.9, 0.65, 0.3, 0.0, 1.0, 0.55];
        for (let i = 0; i < values.length; i += 1) {
            expect(q("#progress").textContent).toBe(`${i} / 6`);
            const slider = q<HTMLInputElement>("#score-slider");
            slider.value = String(values[i]);
            slider.dispatchEvent(new Event("input", { bubbles: true }));
            q<HTMLButtonElement>("#submit-button").click();
            await until(() =>
                document.querySelector("#submit-button") === null
                || document.querySelector<HTMLInputElement>(
                    "#score-field")?.value === "");
        }
        expect(q("#done-message").textContent).toContain("All items scored");
        expect(q("#progress").textContent).toBe("6 / 6");

        q("#aggregate-link").click();
        await until(() =>
            document.querySelector("#aggregate-table") !== null);

        const response = await fetch(
            `${BASE}/api/sessions/${session_id}/aggregate`);
        const aggregate = await response.json() as Aggregate;
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
            .toBe((aggregate.corpus_cms as number).toFixed(2));
        expect(q("#coverage").textContent).toBe(aggregate.coverage.toFixed(2));

        // out-of-range scores are refused by the service, surfaced inline
        const rejected = await fetch(
            `${BASE}/api/sessions/${session_id}/scores`, {
                method: "POST",
                headers: { "Content-Type": "application/json" },
                body: JSON.stringify(
                    { annotator: "judge-1", item_id: "0", value: 1.5 }),
            });
        expect(rejected.status).toBe(400);
    });

    it("serves the static bundle at the root", async () => {
        const page = await fetch(`${BASE}/`);
        expect(page.status).toBe(200);
        const html = await page.text();
        expect(html).toContain('<div id="app">');
        const script = await fetch(`${BASE}/app.js`);
        expect(script.status).toBe(200);
    });
});
