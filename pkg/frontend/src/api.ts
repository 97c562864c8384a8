/**
 * Typed client for the adjudication service.
 *
 * Reads retry with exponential backoff (they are safe to repeat). A
 * decision POST is never blindly retried: if the network drops mid-flight
 * the client first re-reads the tally to learn whether the decision
 * already landed (the slip left the review queue), and only retries when
 * it provably did not. That keeps submissions exactly-once without a
 * server-side idempotency token.
 */

import type {
  AnomalyView,
  Decision,
  PartyInfo,
  ReconciliationView,
  ReviewTask,
  TallySheetDoc,
  TallyView,
} from "./types.js";
import { decisionWire } from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

export interface ApiClientOptions {
  fetchFn?: typeof fetch;
  maxRetries?: number;
  backoffMs?: number;
  sleep?: (ms: number) => Promise<void>;
}

const defaultSleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

export class ApiClient {
  private fetchFn: typeof fetch;
  private maxRetries: number;
  private backoffMs: number;
  private sleep: (ms: number) => Promise<void>;
  /** count of AlreadyDecided (409) responses seen on decision posts */
  alreadyDecidedSeen = 0;

  constructor(
    public readonly baseUrl: string,
    opts: ApiClientOptions = {},
  ) {
    this.fetchFn = opts.fetchFn ?? fetch;
    this.maxRetries = opts.maxRetries ?? 3;
    this.backoffMs = opts.backoffMs ?? 300;
    this.sleep = opts.sleep ?? defaultSleep;
  }

  slipImageUrl(slipId: string): string {
    return `${this.baseUrl}/api/slips/${encodeURIComponent(slipId)}/image`;
  }

  private async getWithRetry(path: string): Promise<Response> {
    let lastErr: unknown;
    for (let attempt = 0; attempt <= this.maxRetries; attempt++) {
      try {
        const res = await this.fetchFn(`${this.baseUrl}${path}`);
        if (res.status >= 500) {
          lastErr = new ApiError(res.status, await res.text());
        } else {
          return res;
        }
      } catch (err) {
        lastErr = err;
      }
      await this.sleep(this.backoffMs * 2 ** attempt);
    }
    throw lastErr;
  }

  private async json<T>(res: Response): Promise<T> {
    if (!res.ok) {
      let detail = res.statusText;
      try {
        const body = await res.json();
        detail = body.detail ?? detail;
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(res.status, detail);
    }
    return (await res.json()) as T;
  }

  async claimNext(worker: string): Promise<ReviewTask | null> {
    const res = await this.getWithRetry(
      `/api/tasks/next?worker=${encodeURIComponent(worker)}`,
    );
    if (res.status === 204) return null;
    return this.json<ReviewTask>(res);
  }

  async getTally(): Promise<TallyView> {
    return this.json(await this.getWithRetry("/api/tally"));
  }

  async getReconciliation(): Promise<ReconciliationView> {
    return this.json(await this.getWithRetry("/api/reconciliation"));
  }

  async getAnomalies(): Promise<AnomalyView> {
    return this.json(await this.getWithRetry("/api/anomalies"));
  }

  async getParties(): Promise<PartyInfo[]> {
    return this.json(await this.getWithRetry("/api/parties"));
  }

  /**
   * Post one decision with the verify-before-retry protocol.
   *
   * Network failures trigger a tally read: if the slip is no longer
   * queued the first attempt landed and its result is synthesised from
   * the fresh tally; otherwise the POST retries. HTTP errors (4xx) are
   * never retried.
   */
  async submitDecision(
    task: { task_id: string; slip_id: string; evm_id: string },
    worker: string,
    decision: Decision,
  ): Promise<TallySheetDoc> {
    for (let attempt = 0; ; attempt++) {
      try {
        const res = await this.fetchFn(
          `${this.baseUrl}/api/tasks/${encodeURIComponent(task.task_id)}/decision`,
          {
            method: "POST",
            headers: { "content-type": "application/json" },
            body: JSON.stringify({ worker, decision: decisionWire(decision) }),
          },
        );
        if (res.status === 409) this.alreadyDecidedSeen++;
        return await this.json<TallySheetDoc>(res);
      } catch (err) {
        if (err instanceof ApiError) throw err; // 4xx/5xx: do not re-post
        if (attempt >= this.maxRetries) throw err;
        await this.sleep(this.backoffMs * 2 ** attempt);
        const landed = await this.decisionLanded(task);
        if (landed !== null) return landed;
        // provably still queued: safe to post again
      }
    }
  }

  /** Returns the machine's tally if the slip already left the queue. */
  private async decisionLanded(task: {
    slip_id: string;
    evm_id: string;
  }): Promise<TallySheetDoc | null> {
    const view = await this.getTally();
    const sheet = view.evms.find((t) => t.evm_id === task.evm_id);
    if (!sheet) return null;
    const queued = sheet.review_queue.some((q) => q.slip_id === task.slip_id);
    return queued ? null : sheet;
  }

  async uploadEvmCounts(evmId: string, counts: Record<string, number>): Promise<void> {
    const res = await this.fetchFn(`${this.baseUrl}/api/evm-counts`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ evm_id: evmId, counts }),
    });
    await this.json(res);
  }

  async reconcile(evmId?: string): Promise<ReconciliationView> {
    const res = await this.fetchFn(`${this.baseUrl}/api/reconcile`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(evmId ? { evm_id: evmId } : {}),
    });
    return this.json(res);
  }
}
