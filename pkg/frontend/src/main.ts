/**
 * Entry point: wires the console to the annotation service.
 *
 * The service origin comes from the `server` query parameter
 * (e.g. ?server=http://localhost:8765); without it the page's own origin
 * is used, which fits a reverse-proxy deployment.
 */

import { AnnotationApi } from "./api.js";
import { AnnotationConsole } from "./console.js";

const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("server") ?? "";
const root = document.getElementById("app");
if (root === null) {
    throw new Error("missing #app container");
}
const app = new AnnotationConsole(new AnnotationApi(baseUrl), root);
void app.start();
