/** Shared test plumbing: a real service instance and the real CLI. */

import { execFileSync, spawn, type ChildProcess } from "node:child_process";
import { readFileSync } from "node:fs";
import { join, resolve } from "node:path";
import { fileURLToPath } from "node:url";

const HERE = fileURLToPath(new URL(".", import.meta.url));
export const REPO_ROOT = resolve(HERE, "..", "..");
export const SPEC_DIR = join(REPO_ROOT, "fixtures", "specs");

export function fixtureText(name: string): string {
  return readFileSync(join(SPEC_DIR, `${name}.wks.json`), "utf8");
}

export function cliCompile(name: string, dialect = "ansi"): string {
  return execFileSync(
    "python3",
    [
      "-m",
      "sheetc.runner.cli",
      "compile",
      join(SPEC_DIR, `${name}.wks.json`),
      "--dialect",
      dialect,
    ],
    { cwd: REPO_ROOT, encoding: "utf8", stdio: ["ignore", "pipe", "pipe"] },
  );
}

export interface TestServer {
  baseUrl: string;
  stop(): void;
}

export async function startServer(): Promise<TestServer> {
  const port = 8100 + Math.floor(Math.random() * 800);
  const child: ChildProcess = spawn(
    "python3",
    [
      "-m",
      "sheetc.runner.cli",
      "serve",
      "--specs",
      SPEC_DIR,
      "--port",
      String(port),
    ],
    { cwd: REPO_ROOT, stdio: ["ignore", "pipe", "pipe"] },
  );
  const baseUrl = `http://127.0.0.1:${port}`;
  const deadline = Date.now() + 30_000;
  for (;;) {
    try {
      const resp = await fetch(`${baseUrl}/explain?session=x&stage=sql`);
      if (resp.status > 0) break;
    } catch {
      if (Date.now() > deadline) {
        child.kill();
        throw new Error("service did not come up in time");
      }
      await new Promise((r) => setTimeout(r, 150));
    }
  }
  return {
    baseUrl,
    stop: () => {
      child.kill("SIGTERM");
    },
  };
}
