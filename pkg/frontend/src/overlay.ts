import type { Box, BoxList } from "./types.js";
import { boxToList, isValidBox } from "./types.js";

export interface FrameGeometry {
  width: number;
  height: number;
}

export interface OverlayOptions {
  editable?: boolean;
  label?: string;
  onChange?: (box: Box) => void;
}

interface DragState {
  mode: "move" | "resize";
  startBox: Box;
  startClientX: number;
  startClientY: number;
  pxPerImagePx: number;
}

/** Rectangle drawn over a frame image. The model is an integer box in
 *  image coordinates; the element's `data-box` attribute always equals the
 *  model, and CSS placement is a pure projection of it. Dragging and
 *  keyboard nudges derive each update from the gesture's starting box plus
 *  a rounded total delta, so coordinates never accumulate rounding error. */
export class BoxOverlay {
  readonly el: HTMLDivElement;
  private box: Box;
  private frame: FrameGeometry;
  private readonly editable: boolean;
  private readonly onChange?: (box: Box) => void;
  private drag: DragState | null = null;
  private displayScale: number | null = null;

  constructor(doc: Document, box: Box, frame: FrameGeometry, options: OverlayOptions = {}) {
    if (!isValidBox(box)) {
      throw new Error(`invalid overlay box ${JSON.stringify(boxToList(box))}`);
    }
    this.box = { ...box };
    this.frame = frame;
    this.editable = options.editable ?? false;
    this.onChange = options.onChange;

    this.el = doc.createElement("div");
    this.el.className = this.editable ? "overlay-box editable" : "overlay-box";
    if (options.label) this.el.title = options.label;
    if (this.editable) {
      this.el.tabIndex = 0;
      const handle = doc.createElement("div");
      handle.className = "overlay-handle";
      this.el.appendChild(handle);
      this.el.addEventListener("pointerdown", (ev) => this.onPointerDown(ev as PointerEvent));
      this.el.addEventListener("keydown", (ev) => this.onKeyDown(ev as KeyboardEvent));
    }
    this.render();
  }

  getBox(): Box {
    return { ...this.box };
  }

  getBoxList(): BoxList {
    return boxToList(this.box);
  }

  setBox(box: Box): void {
    if (!isValidBox(box)) {
      throw new Error(`invalid overlay box ${JSON.stringify(boxToList(box))}`);
    }
    this.box = { ...box };
    this.render();
  }

  /** Displayed pixels per image pixel, for drag translation when layout
   *  cannot be measured (e.g. headless tests). */
  setDisplayScale(pxPerImagePx: number): void {
    this.displayScale = pxPerImagePx;
  }

  /** Move by (dx, dy) image pixels, keeping the box inside the frame. */
  nudge(dx: number, dy: number): void {
    const width = this.box.x2 - this.box.x1;
    const height = this.box.y2 - this.box.y1;
    const x1 = clamp(this.box.x1 + dx, 0, this.frame.width - width);
    const y1 = clamp(this.box.y1 + dy, 0, this.frame.height - height);
    this.commit({ x1, y1, x2: x1 + width, y2: y1 + height });
  }

  /** Grow or shrink the bottom-right corner by (dw, dh) image pixels. */
  resizeBy(dw: number, dh: number): void {
    const x2 = clamp(this.box.x2 + dw, this.box.x1 + 1, this.frame.width);
    const y2 = clamp(this.box.y2 + dh, this.box.y1 + 1, this.frame.height);
    this.commit({ ...this.box, x2, y2 });
  }

  private commit(box: Box): void {
    if (
      box.x1 === this.box.x1 &&
      box.y1 === this.box.y1 &&
      box.x2 === this.box.x2 &&
      box.y2 === this.box.y2
    ) {
      return;
    }
    this.box = box;
    this.render();
    this.onChange?.(this.getBox());
  }

  private render(): void {
    const { width, height } = this.frame;
    // The data attribute carries the exact model; the CSS rectangle is
    // clipped to the canvas when the box touches or crosses an edge.
    this.el.dataset.box = boxToList(this.box).join(",");
    const left = clamp(this.box.x1, 0, width);
    const top = clamp(this.box.y1, 0, height);
    const right = clamp(this.box.x2, 0, width);
    const bottom = clamp(this.box.y2, 0, height);
    this.el.style.left = `${(left / width) * 100}%`;
    this.el.style.top = `${(top / height) * 100}%`;
    this.el.style.width = `${(Math.max(right - left, 0) / width) * 100}%`;
    this.el.style.height = `${(Math.max(bottom - top, 0) / height) * 100}%`;
  }

  private measureScale(): number {
    if (this.displayScale !== null && this.displayScale > 0) return this.displayScale;
    const parent = this.el.parentElement;
    const displayWidth = parent ? parent.clientWidth : 0;
    if (displayWidth > 0) return displayWidth / this.frame.width;
    return 1;
  }

  private onPointerDown(ev: PointerEvent): void {
    ev.preventDefault();
    const target = ev.target as HTMLElement;
    this.drag = {
      mode: target.classList.contains("overlay-handle") ? "resize" : "move",
      startBox: { ...this.box },
      startClientX: ev.clientX,
      startClientY: ev.clientY,
      pxPerImagePx: this.measureScale(),
    };
    const doc = this.el.ownerDocument;
    const onMove = (moveEv: Event) => this.onPointerMove(moveEv as PointerEvent);
    const onUp = () => {
      this.drag = null;
      doc.removeEventListener("pointermove", onMove);
      doc.removeEventListener("pointerup", onUp);
    };
    doc.addEventListener("pointermove", onMove);
    doc.addEventListener("pointerup", onUp);
  }

  private onPointerMove(ev: PointerEvent): void {
    if (!this.drag) return;
    const { mode, startBox, startClientX, startClientY, pxPerImagePx } = this.drag;
    const dx = Math.round((ev.clientX - startClientX) / pxPerImagePx);
    const dy = Math.round((ev.clientY - startClientY) / pxPerImagePx);
    if (mode === "move") {
      const width = startBox.x2 - startBox.x1;
      const height = startBox.y2 - startBox.y1;
      const x1 = clamp(startBox.x1 + dx, 0, this.frame.width - width);
      const y1 = clamp(startBox.y1 + dy, 0, this.frame.height - height);
      this.commit({ x1, y1, x2: x1 + width, y2: y1 + height });
    } else {
      const x2 = clamp(startBox.x2 + dx, startBox.x1 + 1, this.frame.width);
      const y2 = clamp(startBox.y2 + dy, startBox.y1 + 1, this.frame.height);
      this.commit({ x1: startBox.x1, y1: startBox.y1, x2, y2 });
    }
  }

  private onKeyDown(ev: KeyboardEvent): void {
    const step = 1;
    let dx = 0;
    let dy = 0;
    switch (ev.key) {
      case "ArrowLeft":
        dx = -step;
        break;
      case "ArrowRight":
        dx = step;
        break;
      case "ArrowUp":
        dy = -step;
        break;
      case "ArrowDown":
        dy = step;
        break;
      default:
        return;
    }
    ev.preventDefault();
    ev.stopPropagation();
    if (ev.shiftKey) {
      this.resizeBy(dx, dy);
    } else {
      this.nudge(dx, dy);
    }
  }
}

function clamp(value: number, lo: number, hi: number): number {
  return Math.min(Math.max(value, lo), hi);
}
