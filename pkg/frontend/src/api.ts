/**
 * Client for the refocusing service.
 *
 * The service exposes exactly three endpoints: GET /metadata (JSON),
 * GET /refocus and GET /allfocus (PNG bytes plus stats headers).  This module
 * owns URL construction, header parsing, and the debounced single-in-flight
 * fetch policy; it performs no image math of its own.
 */

export const ALPHA_MIN = 0.5;
export const ALPHA_MAX = 1.5;
export const DEBOUNCE_MS = 150;

export interface Metadata {
  dims: [number, number, number, number];
  j_max: number;
  orientations: number[];
  nnz: number;
  cr: number;
  eps: number;
  alpha_range: [number, number];
  has_depth_map: boolean;
}

export interface RefocusParams {
  alpha: number;
  eps?: number;
  levels?: number;
  width?: number;
}

/** Stats headers attached to every successful render response. */
export interface RenderStats {
  computeMs: number;
  cache: string;
  nnzUsed: number;
  sharpnessLeft: number;
  sharpnessRight: number;
}

export interface RenderResult {
  blob: Blob;
  stats: RenderStats;
}

export class ServiceError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

function normalizeBase(baseUrl: string): string {
  return baseUrl.replace(/\/+$/, "");
}

export function buildRefocusUrl(baseUrl: string, params: RefocusParams): string {
  if (!Number.isFinite(params.alpha)) {
    throw new Error("alpha must be a finite number");
  }
  const query = new URLSearchParams({ alpha: String(params.alpha) });
  if (params.eps !== undefined) query.set("eps", String(params.eps));
  if (params.levels !== undefined) query.set("levels", String(params.levels));
  if (params.width !== undefined) query.set("width", String(params.width));
  return `${normalizeBase(baseUrl)}/refocus?${query.toString()}`;
}

export function buildAllfocusUrl(baseUrl: string, width?: number): string {
  const query = new URLSearchParams();
  if (width !== undefined) query.set("width", String(width));
  const suffix = query.size > 0 ? `?${query.toString()}` : "";
  return `${normalizeBase(baseUrl)}/allfocus${suffix}`;
}

export function parseStats(headers: Headers): RenderStats {
  return {
    computeMs: Number(headers.get("X-Compute-Ms") ?? "0"),
    cache: headers.get("X-Cache") ?? "",
    nnzUsed: Number(headers.get("X-Nnz-Used") ?? "0"),
    sharpnessLeft: Number(headers.get("X-Sharpness-Left") ?? "0"),
    sharpnessRight: Number(headers.get("X-Sharpness-Right") ?? "0"),
  };
}

async function raiseServiceError(response: Response): Promise<never> {
  let code = "error";
  let message = `HTTP ${response.status}`;
  try {
    const body = await response.json();
    code = body.code ?? code;
    message = body.message ?? message;
  } catch {
    /* non-JSON error body: keep the status-line message */
  }
  throw new ServiceError(response.status, code, message);
}

export async function fetchMetadata(
  baseUrl: string,
  fetchFn: typeof fetch = fetch,
): Promise<Metadata> {
  const response = await fetchFn(`${normalizeBase(baseUrl)}/metadata`);
  if (!response.ok) await raiseServiceError(response);
  return (await response.json()) as Metadata;
}

export async function fetchRender(
  url: string,
  signal?: AbortSignal,
  fetchFn: typeof fetch = fetch,
): Promise<RenderResult> {
  const response = await fetchFn(url, { signal });
  if (!response.ok) await raiseServiceError(response);
  return { blob: await response.blob(), stats: parseStats(response.headers) };
}

/**
 * Debounced render requester keeping at most one request in flight.
 *
 * Each `request` call restarts the debounce timer; when it fires, any
 * previous in-flight fetch is aborted before the new one starts, so the
 * delivered result always corresponds to the most recent request and the
 * stats panel can never drift from the displayed image.
 */
export class RenderScheduler {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private controller: AbortController | null = null;
  private generation = 0;

  constructor(
    private readonly onResult: (result: RenderResult, url: string) => void,
    private readonly onError: (error: Error) => void,
    private readonly debounceMs: number = DEBOUNCE_MS,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  /** Schedule a render of `url` after the debounce interval. */
  request(url: string): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      void this.fire(url);
    }, this.debounceMs);
  }

  /** Abort any in-flight fetch and cancel a pending debounce. */
  cancel(): void {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    this.controller?.abort();
    this.controller = null;
  }

  get inFlight(): boolean {
    return this.controller !== null;
  }

  private async fire(url: string): Promise<void> {
    this.controller?.abort();
    const controller = new AbortController();
    this.controller = controller;
    const generation = ++this.generation;
    try {
      const result = await fetchRender(url, controller.signal, this.fetchFn);
      if (generation === this.generation) this.onResult(result, url);
    } catch (error) {
      if (controller.signal.aborted) return; // superseded request
      if (generation === this.generation) this.onError(error as Error);
    } finally {
      if (this.controller === controller) this.controller = null;
    }
  }
}
