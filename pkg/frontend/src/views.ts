import type { ApiClient } from "./api.js";
import { BoxOverlay } from "./overlay.js";
import type { FrameGeometry } from "./overlay.js";
import type {
  Box,
  ItemDetail,
  ItemStatus,
  ItemSummary,
  TrajectoryBody,
  Violation,
} from "./types.js";
import { boxFromList, cloneTrajectory } from "./types.js";

const STATUSES: ItemStatus[] = ["pending", "accepted", "dropped", "edited"];

export function makeEl<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function statusBadge(doc: Document, status: ItemStatus): HTMLSpanElement {
  return makeEl(doc, "span", `badge badge-${status}`, status);
}

/** Dismissable message bar with an optional action button. */
export class Banner {
  readonly el: HTMLDivElement;
  private readonly messageEl: HTMLSpanElement;
  private readonly actionEl: HTMLButtonElement;
  private onAction: (() => void) | null = null;

  constructor(doc: Document, id: string) {
    this.el = makeEl(doc, "div", "banner hidden");
    this.el.id = id;
    this.messageEl = makeEl(doc, "span", "banner-message");
    this.actionEl = makeEl(doc, "button", "banner-action");
    this.actionEl.addEventListener("click", () => this.onAction?.());
    this.el.append(this.messageEl, this.actionEl);
  }

  show(message: string, actionLabel: string, onAction: () => void): void {
    this.messageEl.textContent = message;
    this.actionEl.textContent = actionLabel;
    this.onAction = onAction;
    this.el.classList.remove("hidden");
  }

  hide(): void {
    this.el.classList.add("hidden");
    this.onAction = null;
  }

  visible(): boolean {
    return !this.el.classList.contains("hidden");
  }
}

export interface BrowseCallbacks {
  onSelect(index: number): void;
  onOpen(id: string): void;
  onFilter(status: ItemStatus | null): void;
  onPage(delta: number): void;
}

/** Paginated item list with status badges and a status filter. */
export class BrowseView {
  readonly el: HTMLElement;
  private readonly doc: Document;
  private readonly listEl: HTMLElement;
  private readonly filterEl: HTMLSelectElement;
  private readonly pagerLabel: HTMLSpanElement;

  constructor(doc: Document, callbacks: BrowseCallbacks) {
    this.doc = doc;
    this.el = makeEl(doc, "section");
    this.el.id = "browse-view";

    const toolbar = makeEl(doc, "div", "toolbar");
    this.filterEl = makeEl(doc, "select");
    this.filterEl.id = "filter-select";
    const anyOption = makeEl(doc, "option", undefined, "all");
    anyOption.value = "";
    this.filterEl.appendChild(anyOption);
    for (const status of STATUSES) {
      const option = makeEl(doc, "option", undefined, status);
      option.value = status;
      this.filterEl.appendChild(option);
    }
    this.filterEl.addEventListener("change", () => {
      const value = this.filterEl.value;
      callbacks.onFilter(value === "" ? null : (value as ItemStatus));
    });

    const prevBtn = makeEl(doc, "button", undefined, "prev page");
    prevBtn.id = "page-prev";
    prevBtn.addEventListener("click", () => callbacks.onPage(-1));
    const nextBtn = makeEl(doc, "button", undefined, "next page");
    nextBtn.id = "page-next";
    nextBtn.addEventListener("click", () => callbacks.onPage(1));
    this.pagerLabel = makeEl(doc, "span", "pager-label");
    this.pagerLabel.id = "pager-label";
    toolbar.append(this.filterEl, prevBtn, this.pagerLabel, nextBtn);

    this.listEl = makeEl(doc, "div", "item-list");
    this.listEl.addEventListener("click", (ev) => {
      const row = (ev.target as HTMLElement).closest(".item-row") as HTMLElement | null;
      if (!row || row.dataset.index === undefined) return;
      callbacks.onSelect(Number(row.dataset.index));
    });
    this.listEl.addEventListener("dblclick", (ev) => {
      const row = (ev.target as HTMLElement).closest(".item-row") as HTMLElement | null;
      if (!row || !row.dataset.id) return;
      callbacks.onOpen(row.dataset.id);
    });

    this.el.append(toolbar, this.listEl);
  }

  render(items: ItemSummary[], selectedIndex: number, page: number, totalPages: number): void {
    this.listEl.textContent = "";
    items.forEach((item, index) => {
      const row = makeEl(this.doc, "div", index === selectedIndex ? "item-row selected" : "item-row");
      row.dataset.id = item.id;
      row.dataset.index = String(index);
      row.append(
        makeEl(this.doc, "span", "item-id", item.id),
        statusBadge(this.doc, item.status),
        makeEl(this.doc, "span", "item-turns", `${item.turns} turns`),
        makeEl(this.doc, "span", "item-version", `v${item.version}`),
        makeEl(this.doc, "span", "item-provenance", item.provenance),
      );
      this.listEl.appendChild(row);
    });
    if (items.length === 0) {
      this.listEl.appendChild(makeEl(this.doc, "div", "empty-list", "no items"));
    }
    this.pagerLabel.textContent = `page ${page}/${totalPages}`;
  }
}

function toolCallLabel(turn: TrajectoryBody["turns"][number]): string | null {
  const call = turn.tool_call;
  if (call === null) return null;
  if (call.name === "clip") return `clip frames=[${call.arguments.frames.join(", ")}]`;
  return `crop frame=${call.arguments.frame} box=[${call.arguments.box.join(", ")}]`;
}

async function assetImage(
  doc: Document,
  api: ApiClient,
  url: string,
  className: string,
  missingLabel: string,
): Promise<HTMLElement> {
  const size = await api.probePng(url);
  if (size === null) {
    return makeEl(doc, "div", `tile-missing ${className}`, missingLabel);
  }
  const img = makeEl(doc, "img", className) as HTMLImageElement;
  img.src = api.assetUrl(url);
  img.dataset.width = String(size.width);
  img.dataset.height = String(size.height);
  return img;
}

/** Read-only item view: question, gold answers, per-turn reasoning text and
 *  tool calls, clip frame strips, and crop panels that draw the call's box
 *  over the source frame next to the zoomed crop. */
export class InspectView {
  readonly el: HTMLElement;
  private readonly doc: Document;

  constructor(doc: Document) {
    this.doc = doc;
    this.el = makeEl(doc, "section");
    this.el.id = "inspect-view";
  }

  async render(detail: ItemDetail, api: ApiClient): Promise<void> {
    const doc = this.doc;
    this.el.textContent = "";

    const header = makeEl(doc, "div", "inspect-header");
    header.append(
      makeEl(doc, "span", "item-id", detail.item.id),
      statusBadge(doc, detail.item.status),
      makeEl(doc, "span", "item-version", `v${detail.item.version}`),
      makeEl(doc, "span", "item-provenance", detail.item.provenance),
    );
    this.el.appendChild(header);

    this.el.appendChild(makeEl(doc, "div", "question-text", detail.bundle.question));
    const answers = makeEl(doc, "div", "gold-answers");
    for (const answer of detail.bundle.answers) {
      answers.appendChild(makeEl(doc, "span", "answer-gold", answer));
    }
    this.el.appendChild(answers);

    const clipsByTurn = new Map(detail.bundle.clips.map((clip) => [clip.turn_index, clip]));
    const cropsByTurn = new Map<number, typeof detail.bundle.crops>();
    for (const crop of detail.bundle.crops) {
      const bucket = cropsByTurn.get(crop.turn_index) ?? [];
      bucket.push(crop);
      cropsByTurn.set(crop.turn_index, bucket);
    }

    for (const [turnIndex, turn] of detail.trajectory.turns.entries()) {
      const section = makeEl(doc, "section", "turn");
      section.dataset.turn = String(turnIndex);
      section.appendChild(makeEl(doc, "h4", undefined, `turn ${turnIndex}`));
      section.appendChild(makeEl(doc, "pre", "think-text", turn.think));
      const label = toolCallLabel(turn);
      if (label !== null) {
        section.appendChild(makeEl(doc, "span", "tool-chip", label));
      }
      if (turn.answer !== null) {
        section.appendChild(makeEl(doc, "div", "answer-text", turn.answer));
      }

      const clip = clipsByTurn.get(turnIndex);
      if (clip !== undefined) {
        const strip = makeEl(doc, "div", "clip-strip");
        strip.dataset.turn = String(turnIndex);
        for (const [i, frameUrl] of clip.frame_urls.entries()) {
          const frame = clip.frames[i];
          const tile = await assetImage(doc, api, frameUrl, "frame-thumb", `missing frame ${frame}`);
          tile.dataset.frame = String(frame);
          strip.appendChild(tile);
        }
        section.appendChild(strip);
      }

      for (const crop of cropsByTurn.get(turnIndex) ?? []) {
        const panel = makeEl(doc, "div", "crop-panel");
        panel.dataset.turn = String(crop.turn_index);
        panel.dataset.call = String(crop.call_index);
        panel.appendChild(
          makeEl(doc, "h5", undefined, `crop · frame ${crop.frame}`),
        );
        const size = await api.probePng(crop.frame_url);
        if (size === null) {
          panel.appendChild(makeEl(doc, "div", "tile-missing frame-img", `missing frame ${crop.frame}`));
        } else {
          const canvas = makeEl(doc, "div", "frame-canvas");
          const img = makeEl(doc, "img", "frame-img") as HTMLImageElement;
          img.src = api.assetUrl(crop.frame_url);
          canvas.appendChild(img);
          const overlay = new BoxOverlay(doc, boxFromList(crop.box), size, {
            label: `crop box turn ${crop.turn_index}`,
          });
          canvas.appendChild(overlay.el);
          panel.appendChild(canvas);
        }
        const zoom = await assetImage(doc, api, crop.crop_url, "crop-zoom", "missing crop");
        panel.appendChild(zoom);
        section.appendChild(panel);
      }

      this.el.appendChild(section);
    }
  }
}

export interface FixCallbacks {
  onDirty(): void;
  onSubmit(): void;
  onCancel(): void;
}

interface EditableCrop {
  turnIndex: number;
  overlay: BoxOverlay;
}

/** Editable view over one item: reasoning text and final answers become
 *  form fields, crop boxes become draggable rectangles. The buffer is read
 *  back from the DOM on demand, so what the reviewer sees is exactly what
 *  is submitted. Server rejections are rendered inline at the turn they
 *  point at without touching the buffer. */
export class FixView {
  readonly el: HTMLElement;
  private readonly doc: Document;
  private base: TrajectoryBody | null = null;
  private thinkAreas: HTMLTextAreaElement[] = [];
  private answerInputs = new Map<number, HTMLInputElement>();
  private crops: EditableCrop[] = [];
  private topViolations: HTMLElement;
  private turnViolations = new Map<number, HTMLElement>();

  constructor(doc: Document, callbacks: FixCallbacks) {
    this.doc = doc;
    this.el = makeEl(doc, "section");
    this.el.id = "fix-view";
    this.topViolations = makeEl(doc, "div", "violations");
    this.callbacks = callbacks;
  }

  private readonly callbacks: FixCallbacks;

  async render(detail: ItemDetail, api: ApiClient): Promise<void> {
    const doc = this.doc;
    this.el.textContent = "";
    this.base = cloneTrajectory(detail.trajectory);
    this.thinkAreas = [];
    this.answerInputs = new Map();
    this.crops = [];
    this.turnViolations = new Map();
    this.topViolations = makeEl(doc, "div", "violations");

    const header = makeEl(doc, "div", "fix-header");
    header.append(
      makeEl(doc, "span", "item-id", detail.item.id),
      makeEl(doc, "span", "fix-title", "fix mode"),
      makeEl(doc, "span", "item-version", `v${detail.item.version}`),
    );
    this.el.append(header, this.topViolations);

    const cropsByTurn = new Map(detail.bundle.crops.map((crop) => [crop.turn_index, crop]));

    for (const [turnIndex, turn] of this.base.turns.entries()) {
      const section = makeEl(doc, "section", "turn");
      section.dataset.turn = String(turnIndex);
      section.appendChild(makeEl(doc, "h4", undefined, `turn ${turnIndex}`));

      const think = makeEl(doc, "textarea", "fix-think") as HTMLTextAreaElement;
      think.dataset.turn = String(turnIndex);
      think.value = turn.think;
      think.addEventListener("input", () => this.callbacks.onDirty());
      section.appendChild(think);
      this.thinkAreas.push(think);

      if (turn.tool_call !== null && turn.tool_call.name === "crop") {
        const panel = cropsByTurn.get(turnIndex);
        const call = turn.tool_call;
        const size = panel ? await api.probePng(panel.frame_url) : null;
        const geometry: FrameGeometry =
          size ?? { width: call.arguments.box[2], height: call.arguments.box[3] };
        const canvas = makeEl(doc, "div", "frame-canvas");
        if (panel && size !== null) {
          const img = makeEl(doc, "img", "frame-img") as HTMLImageElement;
          img.src = api.assetUrl(panel.frame_url);
          canvas.appendChild(img);
        }
        const overlay = new BoxOverlay(doc, boxFromList(call.arguments.box), geometry, {
          editable: true,
          label: `crop box turn ${turnIndex}`,
          onChange: () => this.callbacks.onDirty(),
        });
        canvas.appendChild(overlay.el);
        section.appendChild(canvas);
        this.crops.push({ turnIndex, overlay });
      } else if (turn.tool_call !== null) {
        const label = toolCallLabel(turn);
        if (label !== null) section.appendChild(makeEl(doc, "span", "tool-chip", label));
      }

      if (turn.answer !== null) {
        const answer = makeEl(doc, "input", "fix-answer") as HTMLInputElement;
        answer.dataset.turn = String(turnIndex);
        answer.value = turn.answer;
        answer.addEventListener("input", () => this.callbacks.onDirty());
        section.appendChild(answer);
        this.answerInputs.set(turnIndex, answer);
      }

      const slot = makeEl(doc, "div", "turn-violations");
      slot.dataset.turn = String(turnIndex);
      section.appendChild(slot);
      this.turnViolations.set(turnIndex, slot);

      this.el.appendChild(section);
    }

    const controls = makeEl(doc, "div", "fix-controls");
    const submit = makeEl(doc, "button", undefined, "submit edit");
    submit.id = "btn-submit-edit";
    submit.addEventListener("click", () => this.callbacks.onSubmit());
    const cancel = makeEl(doc, "button", undefined, "discard edit");
    cancel.id = "btn-cancel-edit";
    cancel.addEventListener("click", () => this.callbacks.onCancel());
    controls.append(submit, cancel);
    this.el.appendChild(controls);
  }

  /** Assemble the edit buffer from the form fields and overlay boxes. */
  buffer(): TrajectoryBody {
    if (this.base === null) throw new Error("fix view has not been rendered");
    const body = cloneTrajectory(this.base);
    for (const [turnIndex, turn] of body.turns.entries()) {
      turn.think = this.thinkAreas[turnIndex].value;
      const answer = this.answerInputs.get(turnIndex);
      if (answer !== undefined) turn.answer = answer.value;
    }
    for (const { turnIndex, overlay } of this.crops) {
      const call = body.turns[turnIndex].tool_call;
      if (call !== null && call.name === "crop") {
        call.arguments.box = overlay.getBoxList();
      }
    }
    return body;
  }

  overlayFor(turnIndex: number): BoxOverlay | null {
    return this.crops.find((crop) => crop.turnIndex === turnIndex)?.overlay ?? null;
  }

  showViolations(violations: Violation[]): void {
    this.clearViolations();
    for (const violation of violations) {
      const line = makeEl(
        this.doc,
        "div",
        "violation-line",
        `${violation.code}: ${violation.message}`,
      );
      const slot = this.turnViolations.get(violation.turn_index);
      (slot ?? this.topViolations).appendChild(line);
    }
  }

  clearViolations(): void {
    this.topViolations.textContent = "";
    for (const slot of this.turnViolations.values()) {
      slot.textContent = "";
    }
  }

  /** Differences between the current buffer and a fresh server body, for
   *  the reload prompt after a version conflict. */
  diffAgainst(server: TrajectoryBody): string[] {
    const buffer = this.buffer();
    const lines: string[] = [];
    const turnCount = Math.max(buffer.turns.length, server.turns.length);
    for (let i = 0; i < turnCount; i += 1) {
      const ours = buffer.turns[i];
      const theirs = server.turns[i];
      if (ours === undefined || theirs === undefined) {
        lines.push(`turn ${i}: present in only one version`);
        continue;
      }
      if (ours.think !== theirs.think) lines.push(`turn ${i}: think text differs`);
      if ((ours.answer ?? "") !== (theirs.answer ?? "")) lines.push(`turn ${i}: answer differs`);
      if (JSON.stringify(ours.tool_call) !== JSON.stringify(theirs.tool_call)) {
        lines.push(`turn ${i}: tool call differs`);
      }
    }
    return lines;
  }
}

export function describeBox(box: Box): string {
  return `[${box.x1}, ${box.y1}, ${box.x2}, ${box.y2}]`;
}
