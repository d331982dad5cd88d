import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import path from "node:path";
import { StateDoc } from "../src/api.js";

const fixtures = path.resolve(
    path.dirname(fileURLToPath(import.meta.url)),
    "..", "..", "tests", "fixtures");

export function fixtureState(): StateDoc {
    return JSON.parse(
        readFileSync(path.join(fixtures, "fixture_state.json"), "utf-8"),
    ) as StateDoc;
}

export function golden(): Record<string, number | string | boolean> {
    return JSON.parse(
        readFileSync(path.join(fixtures, "golden.json"), "utf-8"),
    );
}
