import { ApiClient } from "./api.js";
import { QcApp } from "./app.js";
import "./style.css";

// The only configuration is the backend base URL (?api=http://host:port);
// it defaults to the origin the page is served from.
const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("api") ?? "";
const reviewer = params.get("reviewer") ?? "reviewer";

const root = document.getElementById("app");
if (root === null) {
  throw new Error("missing #app root element");
}

const app = new QcApp(root, new ApiClient(baseUrl), { reviewer });
void app.start();
