/**
 * Browser entry point: bind one session to this tab.
 *
 * The debugged program is the one embedded in the page; the server
 * address can be overridden with `?server=http://127.0.0.1:PORT`.
 */

import { DebugClient } from "./api";
import { App } from "./app";
import { injectStyles } from "./view";

const params = new URLSearchParams(window.location.search);
const server = params.get("server") ?? "http://127.0.0.1:8790";
const source = document.getElementById("program")?.textContent ?? "";
const root = document.getElementById("app");

if (root === null) {
  throw new Error("missing #app mount point");
}

injectStyles(document);
const app = new App({ root, client: new DebugClient(server), source });
app.start().catch((err) => {
  root.textContent = `could not reach the debug service at ${server}: ${String(err)}`;
});
