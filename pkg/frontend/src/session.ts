/** Console session state machine, kept free of DOM concerns so the whole
 * annotation flow is unit-testable and scriptable.
 *
 * The service is the single state of record: every displayed value is fetched
 * from it, and the only client-side state is the not-yet-submitted label
 * queue (which is what makes undo-before-submit possible) plus cosmetic
 * bucket display names.  Selections queue locally one item at a time;
 * completing the batch submits one POST and refreshes batch + curve.
 */

import {
  ApiClient,
  ApiError,
  type CreateSessionRequest,
  type Curve,
  type LabelItem,
  type QueryItem,
  type SessionSummary,
} from "./api.js";

export interface ConsoleEvent {
  at: string;
  action: string;
  detail: string;
}

export interface SubmitOutcome {
  ok: boolean;
  /** True when the failure left the queue intact and a retry could succeed. */
  retryable: boolean;
  message: string | null;
}

export class SessionController {
  summary: SessionSummary;
  items: QueryItem[] = [];
  curve: Curve;
  /** Labels chosen but not yet submitted, in selection order. */
  queue: LabelItem[] = [];
  /** Editable display names for the k_ref reference buckets. */
  palette: string[];
  events: ConsoleEvent[] = [];
  lastError: string | null = null;
  busy = false;

  private constructor(
    private readonly api: ApiClient,
    summary: SessionSummary,
  ) {
    this.summary = summary;
    this.curve = { metric: summary.metric, points: [], true_value: null };
    this.palette = Array.from({ length: summary.k_ref }, (_, i) => `bucket ${i}`);
  }

  static async create(api: ApiClient, request: CreateSessionRequest): Promise<SessionController> {
    const controller = new SessionController(api, await api.createSession(request));
    controller.log("session", `created ${controller.summary.session_id}`);
    await controller.refresh();
    return controller;
  }

  /** Reattach to an existing session (page reload, second tab). */
  static async attach(api: ApiClient, sessionId: string): Promise<SessionController> {
    const controller = new SessionController(api, await api.getSession(sessionId));
    controller.log("session", `attached ${sessionId}`);
    await controller.refresh();
    return controller;
  }

  get sessionId(): string {
    return this.summary.session_id;
  }

  get done(): boolean {
    return this.summary.status === "done";
  }

  get inputDisabled(): boolean {
    return this.done || this.busy;
  }

  /** The single item in focus: first pending item neither staged on the
   * service nor queued locally. */
  get currentItem(): QueryItem | null {
    const queued = new Set(this.queue.map((entry) => entry.id));
    return this.items.find((item) => !item.labeled && !queued.has(item.id)) ?? null;
  }

  /** Every unstaged item in the batch has a queued label. */
  get batchComplete(): boolean {
    return this.items.length > 0 && this.currentItem === null && this.queue.length > 0;
  }

  get progress(): { labelsUsed: number; budget: number } {
    return { labelsUsed: this.summary.labels_used, budget: this.summary.budget };
  }

  /** Queue a bucket choice for the item in focus. */
  choose(label: number): void {
    if (this.inputDisabled) throw new Error("session is not accepting labels");
    if (!Number.isInteger(label) || label < 0 || label >= this.summary.k_ref) {
      throw new Error(`label ${label} outside [0, ${this.summary.k_ref})`);
    }
    const item = this.currentItem;
    if (item === null) throw new Error("no item awaiting a label");
    this.queue.push({ id: item.id, label });
    this.log("label", `queued ${item.id} -> ${label} (${this.palette[label] ?? label})`);
  }

  /** Remove the most recent queued label; focus returns to that item. */
  undo(): void {
    const entry = this.queue.pop();
    if (entry === undefined) throw new Error("nothing to undo");
    this.log("undo", `unqueued ${entry.id} (was ${entry.label})`);
  }

  renameBucket(index: number, name: string): void {
    if (!Number.isInteger(index) || index < 0 || index >= this.palette.length) {
      throw new Error(`bucket ${index} outside [0, ${this.palette.length})`);
    }
    const trimmed = name.trim();
    if (trimmed === "") throw new Error("bucket name must be nonempty");
    this.log("palette", `bucket ${index}: "${this.palette[index]}" -> "${trimmed}"`);
    this.palette[index] = trimmed;
  }

  /** Submit every queued label in one POST.  On success the queue is cleared
   * and batch/curve/summary are refetched; on failure the queue is kept so no
   * selection is lost, and conflicts trigger a resync with the service. */
  async submit(): Promise<SubmitOutcome> {
    if (this.queue.length === 0) return { ok: false, retryable: false, message: "nothing queued" };
    this.busy = true;
    const submitted = this.queue.length;
    try {
      const result = await this.api.postLabels(this.sessionId, { labels: [...this.queue] });
      this.queue = [];
      this.lastError = null;
      this.log("submit", `${submitted} labels accepted; status ${result.status}, round ${result.round}`);
      this.busy = false;
      await this.refresh();
      return { ok: true, retryable: false, message: null };
    } catch (error) {
      this.busy = false;
      if (error instanceof ApiError) {
        this.lastError = error.message;
        this.log("error", `submission rejected: ${error.message}`);
        if (error.status === 409) {
          // Stale tab: resync with the service; reconciliation drops queue
          // entries that no longer belong to the pending batch.
          await this.refresh();
        }
        return { ok: false, retryable: false, message: error.message };
      }
      const message = error instanceof Error ? error.message : String(error);
      this.lastError = `network failure: ${message} (labels kept locally; retry)`;
      this.log("error", this.lastError);
      return { ok: false, retryable: true, message: this.lastError };
    }
  }

  /** Refetch summary, pending batch, and curve; drop queued labels for items
   * that are no longer pending and unstaged. */
  async refresh(): Promise<void> {
    this.summary = await this.api.getSession(this.sessionId);
    const batch = await this.api.getQueries(this.sessionId);
    this.curve = await this.api.getCurve(this.sessionId);
    this.items = batch.items;
    const open = new Set(batch.items.filter((item) => !item.labeled).map((item) => item.id));
    const kept = this.queue.filter((entry) => open.has(entry.id));
    const dropped = this.queue.length - kept.length;
    if (dropped > 0) this.log("sync", `dropped ${dropped} queued label(s) no longer pending`);
    this.queue = kept;
  }

  private log(action: string, detail: string): void {
    this.events.push({ at: new Date().toISOString(), action, detail });
  }
}
