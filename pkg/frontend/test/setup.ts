// Spawns one playgraph service over the checkpoint fixture for the
// whole test run; suites get the base URL via inject("serviceUrl").

import { ChildProcess, spawn } from "node:child_process";
import { fileURLToPath } from "node:url";
import path from "node:path";
import type { TestProject } from "vitest/node";

declare module "vitest" {
    export interface ProvidedContext {
        serviceUrl: string;
    }
}

const repoRoot = path.resolve(
    path.dirname(fileURLToPath(import.meta.url)), "..", "..");

let proc: ChildProcess | null = null;

export default async function setup(project: TestProject): Promise<() => void> {
    const port = 8300 + Math.floor(Math.random() * 600);
    const url = `http://127.0.0.1:${port}`;
    const ckpt = path.join(repoRoot, "tests", "fixtures", "fixture_model.ckpt");
    proc = spawn("python3", [
        "-m", "playgraph.cli", "serve",
        "--model", ckpt, "--bind", "127.0.0.1", "--port", String(port),
    ], { cwd: repoRoot, stdio: "ignore" });

    let up = false;
    for (let i = 0; i < 100 && !up; i++) {
        try {
            const resp = await fetch(`${url}/health`);
            up = resp.ok;
        } catch {
            await new Promise((r) => setTimeout(r, 150));
        }
    }
    if (!up) {
        proc.kill();
        throw new Error("service did not come up on " + url);
    }
    project.provide("serviceUrl", url);
    return () => {
        proc?.kill();
    };
}
