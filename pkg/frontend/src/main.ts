/** DOM wiring for the annotation console.
 *
 * Single-item focus: the annotator sees one queried item at a time and picks
 * a reference bucket by click or digit key; completing the batch submits and
 * the curve gains a point.  All state of record lives in the service — a
 * reload reattaches via the session id in the URL hash and shows exactly what
 * the service reports.
 */

import { ApiClient, type CreateSessionRequest } from "./api.js";
import { drawCurve, type ChartContext } from "./chart.js";
import { SessionController, type SubmitOutcome } from "./session.js";

export interface ConsoleHandle {
  /** Resolves once the initial view is interactive: a controller when a
   * session was reattached from the URL hash, null when the setup form is
   * showing. */
  ready: Promise<SessionController | null>;
  /** Create a session and switch to the annotation view (what the setup
   * form's submit does). */
  start(request: CreateSessionRequest): Promise<SessionController>;
}

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  attrs: Record<string, string> = {},
  text = "",
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  if (text !== "") node.textContent = text;
  return node;
}

function hashSessionId(win: Window | null): string | null {
  const hash = win?.location?.hash ?? "";
  const match = /session=([A-Za-z0-9_-]+)/.exec(hash);
  return match?.[1] ?? null;
}

export function mountConsole(root: HTMLElement, api: ApiClient): ConsoleHandle {
  const doc = root.ownerDocument;
  const win = doc.defaultView;
  root.textContent = "";

  let controller: SessionController | null = null;
  let lastOutcome: SubmitOutcome | null = null;

  // --- static skeleton -----------------------------------------------------
  const setup = el(doc, "form", { class: "setup", "data-testid": "setup" });
  setup.append(el(doc, "h2", {}, "start an annotation session"));
  const fields: Array<[name: string, label: string, value: string]> = [
    ["dataset_path", "dataset JSONL path (on the server)", ""],
    ["clustering_path", "clustering path (on the server)", ""],
    ["k_ref", "reference buckets (k_ref)", "4"],
    ["seed_size", "seed batch size", "10"],
    ["queries_per_round", "queries per round", "10"],
    ["budget", "label budget", "40"],
    ["seed", "pipeline seed", "0"],
    ["metric", "metric (nmi | ami | ari)", "nmi"],
  ];
  for (const [name, label, value] of fields) {
    const row = el(doc, "label", { class: "field" }, label + " ");
    row.append(el(doc, "input", { name, value, "data-testid": `setup-${name}` }));
    setup.append(row);
  }
  const startBtn = el(doc, "button", { type: "submit", "data-testid": "setup-start" }, "create session");
  setup.append(startBtn);
  const setupError = el(doc, "p", { class: "error", "data-testid": "setup-error" });

  const view = el(doc, "section", { class: "console", hidden: "", "data-testid": "console" });
  const header = el(doc, "header", {});
  const sessionLabel = el(doc, "span", { "data-testid": "session-label" });
  const statusLabel = el(doc, "span", { "data-testid": "status-label" });
  const progressText = el(doc, "span", { "data-testid": "progress-text" });
  const progressBar = el(doc, "progress", { "data-testid": "progress-bar", max: "1", value: "0" });
  header.append(sessionLabel, statusLabel, progressBar, progressText);

  const errorBanner = el(doc, "div", { class: "banner error", hidden: "", "data-testid": "error-banner" });
  const errorText = el(doc, "span", { "data-testid": "error-text" });
  const retryBtn = el(doc, "button", { "data-testid": "retry-btn", hidden: "" }, "retry submission");
  errorBanner.append(errorText, retryBtn);

  const finalBanner = el(doc, "div", { class: "banner final", hidden: "", "data-testid": "final-banner" });

  const itemCard = el(doc, "div", { class: "item", "data-testid": "item-card" });
  const itemPos = el(doc, "div", { class: "muted", "data-testid": "item-pos" });
  const itemId = el(doc, "div", { class: "item-id", "data-testid": "item-id" });
  const itemPayload = el(doc, "pre", { class: "payload", "data-testid": "item-payload" });
  itemCard.append(itemPos, itemId, itemPayload);

  const palette = el(doc, "div", { class: "palette", "data-testid": "palette" });
  const undoBtn = el(doc, "button", { "data-testid": "undo-btn" }, "undo (u)");
  const queueList = el(doc, "ul", { class: "queue", "data-testid": "queue-list" });
  const canvas = el(doc, "canvas", { width: "560", height: "220", "data-testid": "curve-canvas" });
  const curveFallback = el(doc, "ol", { class: "curve-points", "data-testid": "curve-points" });
  const eventLog = el(doc, "ul", { class: "log", "data-testid": "event-log" });

  view.append(
    header,
    errorBanner,
    finalBanner,
    itemCard,
    palette,
    undoBtn,
    el(doc, "h3", {}, "queued this batch"),
    queueList,
    el(doc, "h3", {}, "estimate curve"),
    canvas,
    curveFallback,
    el(doc, "h3", {}, "event log"),
    eventLog,
  );
  root.append(setup, setupError, view);

  // --- rendering -----------------------------------------------------------
  function render(): void {
    if (controller === null) return;
    setup.hidden = true;
    view.hidden = false;
    const summary = controller.summary;
    sessionLabel.textContent = `session ${summary.session_id.slice(0, 8)} · ${summary.metric}`;
    statusLabel.textContent = summary.status;
    const { labelsUsed, budget } = controller.progress;
    progressBar.value = budget > 0 ? labelsUsed / budget : 0;
    progressText.textContent = `${labelsUsed} / ${budget} labels`;

    errorBanner.hidden = controller.lastError === null;
    errorText.textContent = controller.lastError ?? "";
    retryBtn.hidden = !(lastOutcome?.retryable ?? false);

    if (controller.done) {
      finalBanner.hidden = false;
      finalBanner.textContent =
        `budget spent — final ${summary.metric} estimate ` +
        `${summary.estimate === null ? "n/a" : summary.estimate.toFixed(4)}`;
    } else {
      finalBanner.hidden = true;
    }

    const item = controller.currentItem;
    const openCount = controller.items.filter((candidate) => !candidate.labeled).length;
    if (item === null) {
      itemPos.textContent = controller.done ? "no more queries" : "batch ready to submit";
      itemId.textContent = "";
      itemPayload.textContent = "";
    } else {
      itemPos.textContent = `item ${controller.queue.length + 1} of ${openCount} in this batch`;
      itemId.textContent = item.id;
      itemPayload.textContent =
        item.payload ?? `embedding preview: [${item.vector_preview.join(", ")}]`;
    }

    palette.textContent = "";
    controller.palette.forEach((name, bucket) => {
      const key = bucket < 9 ? String(bucket + 1) : bucket === 9 ? "0" : "";
      const btn = el(
        doc,
        "button",
        { class: "bucket-btn", "data-bucket": String(bucket), "data-testid": `bucket-${bucket}` },
        key === "" ? name : `${key}: ${name}`,
      );
      btn.disabled = controller!.inputDisabled || item === null;
      btn.addEventListener("click", () => {
        void act(() => chooseAndMaybeSubmit(bucket));
      });
      btn.addEventListener("dblclick", () => {
        const next = win?.prompt?.(`rename bucket ${bucket}`, name);
        if (next) {
          controller!.renameBucket(bucket, next);
          render();
        }
      });
      palette.append(btn);
    });
    undoBtn.disabled = controller.inputDisabled || controller.queue.length === 0;

    queueList.textContent = "";
    for (const entry of controller.queue) {
      queueList.append(
        el(doc, "li", {}, `${entry.id} -> ${controller.palette[entry.label] ?? entry.label}`),
      );
    }

    const ctx = (canvas as HTMLCanvasElement).getContext?.("2d");
    if (ctx) {
      drawCurve(ctx as unknown as ChartContext, 560, 220, controller.curve.points, summary.budget, summary.metric);
    }
    curveFallback.textContent = "";
    for (const point of controller.curve.points) {
      curveFallback.append(
        el(doc, "li", {}, `${point.labels_used}: ${point.estimate.toFixed(6)}`),
      );
    }

    eventLog.textContent = "";
    for (const event of controller.events.slice(-30).reverse()) {
      eventLog.append(el(doc, "li", {}, `[${event.action}] ${event.detail}`));
    }
  }

  // --- actions -------------------------------------------------------------
  let chain: Promise<void> = Promise.resolve();
  function act(step: () => Promise<void> | void): Promise<void> {
    chain = chain.then(async () => {
      try {
        await step();
      } catch (error) {
        if (controller !== null) {
          controller.lastError = error instanceof Error ? error.message : String(error);
        }
      }
      render();
    });
    return chain;
  }

  async function chooseAndMaybeSubmit(bucket: number): Promise<void> {
    if (controller === null || controller.inputDisabled) return;
    controller.choose(bucket);
    render();
    if (controller.batchComplete) {
      lastOutcome = await controller.submit();
    }
  }

  function onKey(event: KeyboardEvent): void {
    if (controller === null || controller.done) return;
    const target = event.target as HTMLElement | null;
    if (target && target.tagName === "INPUT") return;
    if (event.key === "u") {
      if (controller.queue.length > 0) void act(() => controller!.undo());
      return;
    }
    if (/^[0-9]$/.test(event.key)) {
      const bucket = event.key === "0" ? 9 : Number(event.key) - 1;
      if (bucket < controller.summary.k_ref) void act(() => chooseAndMaybeSubmit(bucket));
    }
  }
  doc.addEventListener("keydown", onKey as EventListener);

  undoBtn.addEventListener("click", () => {
    if (controller !== null && controller.queue.length > 0) void act(() => controller!.undo());
  });
  retryBtn.addEventListener("click", () => {
    void act(async () => {
      if (controller !== null) lastOutcome = await controller.submit();
    });
  });

  async function start(request: CreateSessionRequest): Promise<SessionController> {
    controller = await SessionController.create(api, request);
    if (win) win.location.hash = `session=${controller.sessionId}`;
    render();
    return controller;
  }

  setup.addEventListener("submit", (event) => {
    event.preventDefault();
    const value = (name: string): string =>
      (setup.querySelector(`input[name=${name}]`) as HTMLInputElement).value.trim();
    const request: CreateSessionRequest = {
      dataset_path: value("dataset_path"),
      clustering_path: value("clustering_path"),
      config: {
        k_ref: Number(value("k_ref")),
        seed_size: Number(value("seed_size")),
        queries_per_round: Number(value("queries_per_round")),
        budget: Number(value("budget")),
        seed: Number(value("seed")),
        metric: value("metric"),
      },
    };
    start(request).catch((error) => {
      setupError.textContent = error instanceof Error ? error.message : String(error);
    });
  });

  const ready: Promise<SessionController | null> = (async () => {
    const existing = hashSessionId(win);
    if (existing === null) return null;
    controller = await SessionController.attach(api, existing);
    render();
    return controller;
  })();

  return { ready, start };
}

if (typeof document !== "undefined") {
  const app = document.getElementById("app");
  if (app !== null) mountConsole(app, new ApiClient(""));
}
