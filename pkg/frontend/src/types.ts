// Wire types mirroring the review service's JSON payloads. Boxes are
// integer half-open [x1, y1, x2, y2] rectangles in image coordinates.

export type ItemStatus = "pending" | "accepted" | "dropped" | "edited";

export type DecisionAction = "accept" | "drop";

export type BoxList = [number, number, number, number];

export interface Box {
  x1: number;
  y1: number;
  x2: number;
  y2: number;
}

export interface ClipCall {
  name: "clip";
  arguments: { frames: number[] };
}

export interface CropCall {
  name: "crop";
  arguments: { frame: number; box: BoxList };
}

export type ToolCallBody = ClipCall | CropCall;

export interface TurnBody {
  think: string;
  tool_call: ToolCallBody | null;
  answer: string | null;
}

export interface TrajectoryBody {
  id: string;
  instance_id: string;
  provenance: string;
  turns: TurnBody[];
}

export interface ItemSummary {
  id: string;
  instance_id: string;
  status: ItemStatus;
  version: number;
  turns: number;
  provenance: string;
}

export interface ItemPage {
  items: ItemSummary[];
  total: number;
  page: number;
  page_size: number;
}

export interface ClipPanel {
  turn_index: number;
  frames: number[];
  frame_urls: string[];
}

export interface CropPanel {
  turn_index: number;
  call_index: number;
  frame: number;
  box: BoxList;
  frame_url: string;
  crop_url: string;
}

export interface RenderBundle {
  question: string;
  answers: string[];
  video: string;
  clips: ClipPanel[];
  crops: CropPanel[];
}

export interface HistoryEntry {
  action: string;
  reviewer: string;
  [key: string]: unknown;
}

export interface ItemDetail {
  item: ItemSummary;
  trajectory: TrajectoryBody;
  history: HistoryEntry[];
  bundle: RenderBundle;
}

export interface Violation {
  code: string;
  turn_index: number;
  message: string;
}

export interface ErrorBody {
  code: string;
  message: string;
  violations?: Violation[];
}

export interface ExportManifest {
  total: number;
  exported: number;
  counts: Record<ItemStatus, number>;
  log_head: string;
}

export function boxFromList(list: BoxList): Box {
  return { x1: list[0], y1: list[1], x2: list[2], y2: list[3] };
}

export function boxToList(box: Box): BoxList {
  return [box.x1, box.y1, box.x2, box.y2];
}

export function isValidBox(box: Box): boolean {
  return (
    Number.isInteger(box.x1) &&
    Number.isInteger(box.y1) &&
    Number.isInteger(box.x2) &&
    Number.isInteger(box.y2) &&
    box.x1 < box.x2 &&
    box.y1 < box.y2
  );
}

export function cloneTrajectory(body: TrajectoryBody): TrajectoryBody {
  return JSON.parse(JSON.stringify(body)) as TrajectoryBody;
}
