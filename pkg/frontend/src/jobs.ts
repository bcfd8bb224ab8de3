/** Refactorization requests: one pending job at a time, polled with backoff. */

import { ApiClient, JobStatus } from "./api.js";

export interface PollOptions {
  initialIntervalMs: number;
  backoffFactor: number;
  maxIntervalMs: number;
  timeoutMs: number;
}

const DEFAULT_POLL: PollOptions = {
  initialIntervalMs: 250,
  backoffFactor: 1.5,
  maxIntervalMs: 4000,
  timeoutMs: 10 * 60 * 1000,
};

export type JobOutcome =
  | { kind: "done"; k: number; jobId: string }
  | { kind: "failed"; k: number; jobId: string; error: string };

const sleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

/**
 * Coalesces concurrent requests: while a job for some k is in flight,
 * another request for the same k returns the in-flight promise instead
 * of posting a second job.
 */
export class RefactorizeController {
  private pending: { k: number; promise: Promise<JobOutcome> } | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly poll: PollOptions = DEFAULT_POLL,
  ) {}

  get pendingK(): number | null {
    return this.pending?.k ?? null;
  }

  request(k: number, seed = 0, restarts = 1): Promise<JobOutcome> {
    if (this.pending && this.pending.k === k) {
      return this.pending.promise;
    }
    if (this.pending) {
      // a different k while one is in flight: let the server queue it,
      // but chain locally so outcomes arrive in submission order
      const previous = this.pending.promise;
      const chained = previous
        .catch(() => undefined)
        .then(() => this.run(k, seed, restarts));
      this.pending = { k, promise: this.finalize(k, chained) };
      return this.pending.promise;
    }
    this.pending = { k, promise: this.finalize(k, this.run(k, seed, restarts)) };
    return this.pending.promise;
  }

  private finalize(k: number, promise: Promise<JobOutcome>): Promise<JobOutcome> {
    return promise.finally(() => {
      if (this.pending && this.pending.k === k) {
        this.pending = null;
      }
    });
  }

  private async run(k: number, seed: number, restarts: number): Promise<JobOutcome> {
    const ref = await this.api.postFactorize(k, seed, restarts);
    const job = await this.waitFor(ref.job_id);
    if (job.status === "done") {
      return { kind: "done", k, jobId: ref.job_id };
    }
    return {
      kind: "failed",
      k,
      jobId: ref.job_id,
      error: job.error ?? `job ${ref.job_id} ended as ${job.status}`,
    };
  }

  private async waitFor(jobId: string): Promise<JobStatus> {
    const deadline = Date.now() + this.poll.timeoutMs;
    let interval = this.poll.initialIntervalMs;
    for (;;) {
      const job = await this.api.getJob(jobId);
      if (job.status === "done" || job.status === "failed") {
        return job;
      }
      if (Date.now() > deadline) {
        return { ...job, status: "failed", error: "client-side poll timeout" };
      }
      await sleep(interval);
      interval = Math.min(interval * this.poll.backoffFactor, this.poll.maxIntervalMs);
    }
  }
}
