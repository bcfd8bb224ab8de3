import { ApiClient } from "./api.js";
import { ExplorerApp } from "./app.js";
import { fromQuery } from "./state.js";

declare global {
  interface Window {
    MOBILICITY_API?: string;
  }
}

const root = document.getElementById("app");
if (root) {
  const base = window.MOBILICITY_API ?? "";
  const app = new ExplorerApp(root, new ApiClient(base),
                              fromQuery(window.location.search));
  void app.init().catch((err) => {
    console.error("explorer failed to start", err);
  });
}
