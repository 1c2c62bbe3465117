// In-memory stand-in for the review service, mirroring its REST contract:
// paginated listing, item detail with render bundle, PNG frame/crop assets,
// optimistic versioning on writes (409), edit validation with a violation
// list (422), and export counting. Exposes a fetch-compatible function so
// the client under test needs no network.

import type { FetchLike } from "../src/api.js";
import type {
  BoxList,
  DecisionAction,
  HistoryEntry,
  ItemStatus,
  ItemSummary,
  TrajectoryBody,
  Violation,
} from "../src/types.js";

const STATUSES: ItemStatus[] = ["pending", "accepted", "dropped", "edited"];

export interface MockItem {
  id: string;
  instance_id: string;
  video: string;
  question: string;
  answers: string[];
  status: ItemStatus;
  version: number;
  provenance: string;
  trajectory: TrajectoryBody;
  history: HistoryEntry[];
  frameCount: number;
  frameWidth: number;
  frameHeight: number;
  /** Allowed region per frame index; crop boxes must stay inside it. */
  evidence: Record<number, BoxList>;
  /** Frame indices whose assets 404, to exercise placeholder tiles. */
  missingFrames: Set<number>;
}

interface LogEntry {
  action: string;
  id: string;
  reviewer: string;
  version: number;
}

function clone<T>(value: T): T {
  return JSON.parse(JSON.stringify(value)) as T;
}

function summarize(item: MockItem): ItemSummary {
  return {
    id: item.id,
    instance_id: item.instance_id,
    status: item.status,
    version: item.version,
    turns: item.trajectory.turns.length,
    provenance: item.provenance,
  };
}

/** Minimal PNG: signature plus an IHDR chunk carrying the pixel size.
 *  The client only parses the header, so the pixel data is omitted. */
export function pngBytes(width: number, height: number): Uint8Array {
  const bytes = new Uint8Array(33);
  bytes.set([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a], 0);
  const view = new DataView(bytes.buffer);
  view.setUint32(8, 13);
  bytes.set([0x49, 0x48, 0x44, 0x52], 12); // "IHDR"
  view.setUint32(16, width);
  view.setUint32(20, height);
  bytes.set([8, 2, 0, 0, 0], 24); // bit depth, colour type, flags
  return bytes;
}

function responseOf(status: number, body: string | Uint8Array, contentType: string): Response {
  const fake = {
    ok: status >= 200 && status < 300,
    status,
    headers: { get: (name: string) => (name.toLowerCase() === "content-type" ? contentType : null) },
    json: () => {
      if (typeof body !== "string") return Promise.reject(new Error("binary body"));
      return Promise.resolve(JSON.parse(body) as unknown);
    },
    arrayBuffer: () => {
      if (typeof body === "string") {
        return Promise.resolve(new TextEncoder().encode(body).buffer as ArrayBuffer);
      }
      return Promise.resolve(
        body.buffer.slice(body.byteOffset, body.byteOffset + body.byteLength) as ArrayBuffer,
      );
    },
  };
  return fake as unknown as Response;
}

function jsonResponse(status: number, payload: unknown): Response {
  return responseOf(status, JSON.stringify(payload), "application/json");
}

function errorResponse(status: number, code: string, message: string, violations?: Violation[]): Response {
  const body: Record<string, unknown> = { code, message };
  if (violations !== undefined) body.violations = violations;
  return jsonResponse(status, body);
}

export class MockBackend {
  readonly items = new Map<string, MockItem>();
  readonly log: LogEntry[] = [];
  /** When true every request rejects, as an unreachable backend would. */
  offline = false;
  readonly fetch: FetchLike;

  constructor(items: MockItem[]) {
    for (const item of items) {
      this.items.set(item.id, item);
    }
    this.fetch = (url, init) => this.route(url, init);
  }

  /** Apply a decision server-side, as if another reviewer raced us. */
  directDecision(id: string, action: DecisionAction, reviewer: string): void {
    const item = this.items.get(id);
    if (item === undefined) throw new Error(`unknown item ${id}`);
    item.status = action === "accept" ? "accepted" : "dropped";
    item.version += 1;
    item.history.push({ action, reviewer });
    this.log.push({ action, id, reviewer, version: item.version });
  }

  private async route(url: string, init?: RequestInit): Promise<Response> {
    if (this.offline) {
      throw new TypeError("fetch failed: backend unreachable");
    }
    const parsed = new URL(url, "http://mock");
    const method = init?.method ?? "GET";
    const path = parsed.pathname;

    if (method === "GET" && path === "/items") {
      return this.listItems(parsed.searchParams);
    }
    const assetMatch = path.match(/^\/items\/([^/]+)\/(frames|crops)\/(\d+)$/);
    if (method === "GET" && assetMatch !== null) {
      return this.asset(assetMatch[1], assetMatch[2] as "frames" | "crops", Number(assetMatch[3]));
    }
    const detailMatch = path.match(/^\/items\/([^/]+)$/);
    if (method === "GET" && detailMatch !== null) {
      return this.itemDetail(detailMatch[1]);
    }
    const decisionMatch = path.match(/^\/items\/([^/]+)\/decision$/);
    if (method === "POST" && decisionMatch !== null) {
      return this.decide(decisionMatch[1], parseBody(init));
    }
    const bodyMatch = path.match(/^\/items\/([^/]+)\/body$/);
    if (method === "PUT" && bodyMatch !== null) {
      return this.editBody(bodyMatch[1], parseBody(init));
    }
    if (method === "POST" && path === "/export") {
      return this.exportCurated();
    }
    return errorResponse(404, "not_found", `no route for ${method} ${path}`);
  }

  private listItems(params: URLSearchParams): Response {
    const status = params.get("status");
    if (status !== null && !STATUSES.includes(status as ItemStatus)) {
      return errorResponse(422, "invalid_request", `unknown status '${status}'`);
    }
    const page = Number(params.get("page") ?? "1");
    const pageSize = Number(params.get("page_size") ?? "20");
    const all = [...this.items.values()]
      .filter((item) => status === null || item.status === status)
      .sort((a, b) => (a.id < b.id ? -1 : a.id > b.id ? 1 : 0));
    const start = (page - 1) * pageSize;
    const items = all.slice(start, start + pageSize).map(summarize);
    return jsonResponse(200, { items, total: all.length, page, page_size: pageSize });
  }

  private itemDetail(id: string): Response {
    const item = this.items.get(id);
    if (item === undefined) {
      return errorResponse(404, "not_found", `unknown item ${id}`);
    }
    return jsonResponse(200, {
      item: summarize(item),
      trajectory: clone(item.trajectory),
      history: clone(item.history),
      bundle: this.bundle(item),
    });
  }

  private bundle(item: MockItem): unknown {
    const clips: unknown[] = [];
    const crops: unknown[] = [];
    let cropOrdinal = 0;
    for (const [turnIndex, turn] of item.trajectory.turns.entries()) {
      const call = turn.tool_call;
      if (call === null) continue;
      if (call.name === "clip") {
        clips.push({
          turn_index: turnIndex,
          frames: [...call.arguments.frames],
          frame_urls: call.arguments.frames.map((f) => `/items/${item.id}/frames/${f}`),
        });
      } else {
        crops.push({
          turn_index: turnIndex,
          call_index: cropOrdinal,
          frame: call.arguments.frame,
          box: [...call.arguments.box],
          frame_url: `/items/${item.id}/frames/${call.arguments.frame}`,
          crop_url: `/items/${item.id}/crops/${cropOrdinal}`,
        });
        cropOrdinal += 1;
      }
    }
    return {
      question: item.question,
      answers: [...item.answers],
      video: item.video,
      clips,
      crops,
    };
  }

  private asset(id: string, kind: "frames" | "crops", index: number): Response {
    const item = this.items.get(id);
    if (item === undefined) {
      return errorResponse(404, "not_found", `unknown item ${id}`);
    }
    if (kind === "frames") {
      if (index >= item.frameCount || item.missingFrames.has(index)) {
        return errorResponse(404, "not_found", `no frame ${index} for ${id}`);
      }
      return responseOf(200, pngBytes(item.frameWidth, item.frameHeight), "image/png");
    }
    const cropCalls = item.trajectory.turns.filter(
      (turn) => turn.tool_call !== null && turn.tool_call.name === "crop",
    );
    const call = cropCalls[index]?.tool_call;
    if (call === undefined || call === null || call.name !== "crop") {
      return errorResponse(404, "not_found", `no crop ${index} for ${id}`);
    }
    if (item.missingFrames.has(call.arguments.frame)) {
      return errorResponse(404, "not_found", `no crop ${index} for ${id}`);
    }
    const [x1, y1, x2, y2] = call.arguments.box;
    return responseOf(200, pngBytes(x2 - x1, y2 - y1), "image/png");
  }

  private decide(id: string, body: Record<string, unknown> | null): Response {
    const item = this.items.get(id);
    if (item === undefined) {
      return errorResponse(404, "not_found", `unknown item ${id}`);
    }
    if (body === null) {
      return errorResponse(422, "invalid_request", "decision body is not JSON");
    }
    for (const key of ["action", "reviewer", "expected_version"]) {
      if (!(key in body)) {
        return errorResponse(422, "invalid_request", `decision body missing '${key}'`);
      }
    }
    const action = body.action as string;
    if (action !== "accept" && action !== "drop") {
      return errorResponse(422, "invalid_request", `unknown action '${action}'`);
    }
    const expected = body.expected_version as number;
    if (expected !== item.version) {
      return errorResponse(
        409,
        "version_conflict",
        `item ${id} is at version ${item.version}, expected ${expected}`,
      );
    }
    const reviewer = body.reviewer as string;
    item.status = action === "accept" ? "accepted" : "dropped";
    item.version += 1;
    item.history.push({ action, reviewer });
    this.log.push({ action, id, reviewer, version: item.version });
    return jsonResponse(200, summarize(item));
  }

  private editBody(id: string, body: Record<string, unknown> | null): Response {
    const item = this.items.get(id);
    if (item === undefined) {
      return errorResponse(404, "not_found", `unknown item ${id}`);
    }
    if (body === null) {
      return errorResponse(422, "invalid_request", "edit body is not JSON");
    }
    for (const key of ["trajectory", "reviewer", "expected_version"]) {
      if (!(key in body)) {
        return errorResponse(422, "invalid_request", `edit body missing '${key}'`);
      }
    }
    const expected = body.expected_version as number;
    if (expected !== item.version) {
      return errorResponse(
        409,
        "version_conflict",
        `item ${id} is at version ${item.version}, expected ${expected}`,
      );
    }
    const trajectory = body.trajectory as TrajectoryBody;
    const violations = this.validate(item, trajectory);
    if (violations.length > 0) {
      return errorResponse(422, "validation_failed", "edited body failed validation", violations);
    }
    const reviewer = body.reviewer as string;
    item.trajectory = clone(trajectory);
    item.provenance = trajectory.provenance;
    item.status = "edited";
    item.version += 1;
    item.history.push({ action: "edit", reviewer });
    this.log.push({ action: "edit", id, reviewer, version: item.version });
    return jsonResponse(200, summarize(item));
  }

  private validate(item: MockItem, trajectory: TrajectoryBody): Violation[] {
    const violations: Violation[] = [];
    if (trajectory.id !== item.id) {
      violations.push({ code: "format", turn_index: -1, message: "trajectory id mismatch" });
    }
    if (trajectory.instance_id !== item.instance_id) {
      violations.push({ code: "format", turn_index: -1, message: "instance id mismatch" });
    }
    trajectory.turns.forEach((turn, turnIndex) => {
      const call = turn.tool_call;
      if (call !== null && call.name === "crop") {
        const [x1, y1, x2, y2] = call.arguments.box;
        const ints = [x1, y1, x2, y2].every(Number.isInteger);
        if (!ints || x1 >= x2 || y1 >= y2) {
          violations.push({
            code: "format",
            turn_index: turnIndex,
            message: "crop box is not a valid integer rectangle",
          });
          return;
        }
        if (x1 < 0 || y1 < 0 || x2 > item.frameWidth || y2 > item.frameHeight) {
          violations.push({
            code: "grounding",
            turn_index: turnIndex,
            message: "crop box falls outside the frame",
          });
        }
        const evidence = item.evidence[call.arguments.frame];
        if (evidence !== undefined) {
          const [ex1, ey1, ex2, ey2] = evidence;
          if (x1 < ex1 || y1 < ey1 || x2 > ex2 || y2 > ey2) {
            violations.push({
              code: "grounding",
              turn_index: turnIndex,
              message: "crop box strays outside the evidence region",
            });
          }
        }
      }
    });
    const last = trajectory.turns[trajectory.turns.length - 1];
    const answer = last?.answer ?? null;
    if (answer === null || answer.trim() === "") {
      violations.push({
        code: "format",
        turn_index: trajectory.turns.length - 1,
        message: "final turn has no answer",
      });
    } else if (!item.answers.some((gold) => gold.toLowerCase() === answer.trim().toLowerCase())) {
      violations.push({
        code: "correctness",
        turn_index: trajectory.turns.length - 1,
        message: "final answer does not match any reference answer",
      });
    }
    return violations;
  }

  private exportCurated(): Response {
    const counts: Record<ItemStatus, number> = {
      pending: 0,
      accepted: 0,
      dropped: 0,
      edited: 0,
    };
    for (const item of this.items.values()) {
      counts[item.status] += 1;
    }
    const exported = counts.accepted + counts.edited;
    const last = this.log[this.log.length - 1];
    const logHead = last === undefined ? "" : `${this.log.length}:${last.action}:${last.id}`;
    return jsonResponse(200, {
      total: this.items.size,
      exported,
      counts,
      log_head: logHead,
    });
  }
}

function parseBody(init?: RequestInit): Record<string, unknown> | null {
  if (init?.body === undefined || typeof init.body !== "string") return null;
  try {
    return JSON.parse(init.body) as Record<string, unknown>;
  } catch {
    return null;
  }
}

export interface SeedOptions {
  count?: number;
  missingFrameItemIndex?: number;
}

/** Build `count` pending items with a clip turn, a crop turn, and an
 *  answer turn each. One item can be given a missing frame asset. */
export function seedItems(options: SeedOptions = {}): MockItem[] {
  const count = options.count ?? 20;
  const items: MockItem[] = [];
  for (let i = 0; i < count; i += 1) {
    const pad = String(i).padStart(3, "0");
    const instance = `inst-${pad}`;
    const id = `${instance}.t0`;
    const trajectory: TrajectoryBody = {
      id,
      instance_id: instance,
      provenance: "synthesized",
      turns: [
        {
          think: "Scan the opening frames for the labelled poster.",
          tool_call: { name: "clip", arguments: { frames: [0, 1] } },
          answer: null,
        },
        {
          think: "Zoom into the poster region to read the label.",
          tool_call: { name: "crop", arguments: { frame: 1, box: [16, 12, 40, 28] } },
          answer: null,
        },
        {
          think: "The poster text is legible in the crop.",
          tool_call: null,
          answer: "delta",
        },
      ],
    };
    items.push({
      id,
      instance_id: instance,
      video: `vid${i % 3}`,
      question: "what does the poster say?",
      answers: ["delta"],
      status: "pending",
      version: 1,
      provenance: "synthesized",
      trajectory,
      history: [],
      frameCount: 4,
      frameWidth: 64,
      frameHeight: 64,
      evidence: { 1: [8, 8, 56, 44] },
      missingFrames:
        options.missingFrameItemIndex !== undefined && i === options.missingFrameItemIndex
          ? new Set([0])
          : new Set(),
    });
  }
  return items;
}
