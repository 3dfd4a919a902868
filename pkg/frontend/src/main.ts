import { ApiClient } from "./api.js";
import { App, readConfig } from "./dom.js";
import { Store } from "./state.js";

async function start(): Promise<void> {
  const config = readConfig();
  const params = new URLSearchParams(window.location.search);
  const problemId = params.get("problem") ?? "mul-001";
  const studentId = params.get("student") ?? "web-student";

  const store = new Store(new ApiClient(config));
  const app = new App(store, studentId, config.debug);
  app.bind();
  await store.loadProblem(problemId);
  app.sync();
}

window.addEventListener("load", () => {
  void start();
});
