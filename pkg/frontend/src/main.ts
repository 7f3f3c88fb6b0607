import { ViewerApp } from "./ui.js";

const params = new URLSearchParams(window.location.search);
const url = params.get("server") ?? "ws://127.0.0.1:7878";
const root = document.getElementById("app");
if (!root) {
  throw new Error("missing #app element");
}
new ViewerApp(root, url);
