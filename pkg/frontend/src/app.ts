import { ApiClient, ApiError } from "./api.js";
import { ReviewSession } from "./state.js";
import { Banner, BrowseView, FixView, InspectView, makeEl } from "./views.js";
import type { DecisionAction, ItemDetail, ItemStatus } from "./types.js";

export interface AppOptions {
  reviewer: string;
  pageSize?: number;
  exportPath?: string;
}

type Mode = "browse" | "inspect" | "fix";

/** Single-page review tool. Keyboard map: j/k (or arrows) move between
 *  items, Enter opens the selected item, a accepts, d drops, f enters fix
 *  mode, s submits an edit, e exports, Escape goes back or discards.
 *  All backend work funnels through one queue so interactions stay ordered
 *  and tests can `await app.idle()`. */
export class QcApp {
  readonly session: ReviewSession;
  mode: Mode = "browse";
  detail: ItemDetail | null = null;

  private readonly root: HTMLElement;
  private readonly doc: Document;
  private readonly api: ApiClient;
  private readonly browse: BrowseView;
  private readonly inspect: InspectView;
  private readonly fix: FixView;
  private readonly retryBanner: Banner;
  private readonly conflictBanner: Banner;
  private readonly conflictDiff: HTMLElement;
  private readonly statusLine: HTMLElement;
  private readonly exportStatus: HTMLElement;
  private readonly exportPathInput: HTMLInputElement;
  private pending: Promise<void> = Promise.resolve();

  constructor(root: HTMLElement, api: ApiClient, options: AppOptions) {
    this.root = root;
    this.doc = root.ownerDocument;
    this.api = api;
    this.session = new ReviewSession(api, options);

    const doc = this.doc;
    const header = makeEl(doc, "header", "app-header");
    header.append(
      makeEl(doc, "h1", undefined, "trajectory review"),
      makeEl(doc, "span", "reviewer-name", options.reviewer),
    );
    this.exportPathInput = makeEl(doc, "input") as HTMLInputElement;
    this.exportPathInput.id = "export-path";
    this.exportPathInput.value = options.exportPath ?? "curated.jsonl";
    const exportBtn = makeEl(doc, "button", undefined, "export");
    exportBtn.id = "btn-export";
    exportBtn.addEventListener("click", () => this.queue(() => this.doExport()));
    this.exportStatus = makeEl(doc, "span");
    this.exportStatus.id = "export-status";
    header.append(this.exportPathInput, exportBtn, this.exportStatus);

    this.retryBanner = new Banner(doc, "retry-banner");
    this.conflictBanner = new Banner(doc, "conflict-banner");
    this.conflictDiff = makeEl(doc, "div", "hidden");
    this.conflictDiff.id = "conflict-diff";
    this.statusLine = makeEl(doc, "div");
    this.statusLine.id = "status-line";

    this.browse = new BrowseView(doc, {
      onSelect: (index) => {
        if (this.mode !== "browse") return;
        this.session.selectedIndex = index;
        this.renderBrowse();
      },
      onOpen: (id) => this.queue(() => this.openItem(id)),
      onFilter: (status) => this.queue(() => this.applyFilter(status)),
      onPage: (delta) => this.queue(() => this.turnPage(delta)),
    });
    this.inspect = new InspectView(doc);
    this.fix = new FixView(doc, {
      onDirty: () => this.session.markDirty(),
      onSubmit: () => this.queue(() => this.submitFix()),
      onCancel: () => this.queue(() => this.cancelFix()),
    });
    this.inspect.el.classList.add("hidden");
    this.fix.el.classList.add("hidden");

    root.append(
      header,
      this.retryBanner.el,
      this.conflictBanner.el,
      this.conflictDiff,
      this.statusLine,
      this.browse.el,
      this.inspect.el,
      this.fix.el,
    );

    doc.addEventListener("keydown", (ev) => this.onKeyDown(ev as KeyboardEvent));
  }

  async start(): Promise<void> {
    await this.refreshList();
  }

  /** Resolves once every queued interaction has settled, including ones
   *  enqueued by an operation that was already running. */
  async idle(): Promise<void> {
    let current: Promise<void>;
    do {
      current = this.pending;
      await current;
    } while (this.pending !== current);
  }

  private queue(op: () => Promise<void>): void {
    this.pending = this.pending.then(op).catch((err) => {
      this.status(`internal error: ${String(err)}`);
    });
  }

  private status(message: string): void {
    this.statusLine.textContent = message;
  }

  private setMode(mode: Mode): void {
    this.mode = mode;
    this.browse.el.classList.toggle("hidden", mode !== "browse");
    this.inspect.el.classList.toggle("hidden", mode !== "inspect");
    this.fix.el.classList.toggle("hidden", mode !== "fix");
  }

  private renderBrowse(): void {
    this.browse.render(
      this.session.items,
      this.session.selectedIndex,
      this.session.page,
      this.session.totalPages(),
    );
  }

  private async refreshList(): Promise<void> {
    try {
      await this.session.refresh();
    } catch (err) {
      if (err instanceof ApiError && err.status === 0) {
        // Keep whatever list is already rendered; offer a retry.
        this.retryBanner.show(err.message, "retry", () => this.queue(() => this.refreshList()));
        return;
      }
      throw err;
    }
    this.retryBanner.hide();
    this.renderBrowse();
  }

  private async applyFilter(status: ItemStatus | null): Promise<void> {
    if (this.session.dirty) {
      this.status("submit or discard the edit first");
      return;
    }
    await this.guarded(async () => {
      await this.session.setFilter(status);
      this.renderBrowse();
    });
  }

  private async turnPage(delta: number): Promise<void> {
    await this.guarded(async () => {
      const moved = delta > 0 ? await this.session.nextPage() : await this.session.prevPage();
      if (moved) this.renderBrowse();
    });
  }

  private async openItem(id: string): Promise<void> {
    await this.guarded(async () => {
      const detail = await this.session.open(id);
      this.detail = detail;
      const index = this.session.items.findIndex((item) => item.id === id);
      if (index >= 0) this.session.selectedIndex = index;
      await this.inspect.render(detail, this.api);
      this.setMode("inspect");
      this.renderBrowse();
      this.conflictBanner.hide();
      this.hideDiff();
    });
  }

  private async navigate(delta: number): Promise<void> {
    if (this.mode === "fix" || this.session.dirty) {
      this.status("submit or discard the edit first");
      return;
    }
    const moved = delta > 0 ? this.session.next() : this.session.prev();
    if (!moved) return;
    if (this.mode === "browse") {
      this.renderBrowse();
      return;
    }
    const selected = this.session.selected();
    if (selected !== null) await this.openItem(selected.id);
  }

  private async decide(action: DecisionAction): Promise<void> {
    if (this.mode === "fix") {
      this.status("submit or discard the edit first");
      return;
    }
    const target = this.mode === "inspect" ? this.detail?.item : this.session.selected();
    if (target === undefined || target === null) return;
    try {
      const updated = await this.session.decide(target.id, action);
      this.status(`${updated.id} → ${updated.status} (v${updated.version})`);
      this.renderBrowse();
      if (this.mode === "inspect") await this.openItem(updated.id);
    } catch (err) {
      this.handleWriteError(err, target.id);
    }
  }

  private async enterFix(): Promise<void> {
    if (this.mode !== "inspect" || this.detail === null) return;
    await this.fix.render(this.detail, this.api);
    this.setMode("fix");
  }

  private async submitFix(): Promise<void> {
    if (this.mode !== "fix" || this.detail === null) return;
    const id = this.detail.item.id;
    try {
      const updated = await this.session.submitEdit(id, this.fix.buffer());
      this.fix.clearViolations();
      this.status(`${updated.id} → ${updated.status} (v${updated.version})`);
      await this.openItem(id);
    } catch (err) {
      this.handleWriteError(err, id);
    }
  }

  private async cancelFix(): Promise<void> {
    if (this.mode !== "fix" || this.detail === null) return;
    this.session.clearDirty();
    this.fix.clearViolations();
    this.conflictBanner.hide();
    this.hideDiff();
    await this.inspect.render(this.detail, this.api);
    this.setMode("inspect");
  }

  private async doExport(): Promise<void> {
    if (this.session.dirty) {
      this.status("submit or discard the edit first");
      return;
    }
    try {
      const manifest = await this.session.exportCurated(this.exportPathInput.value);
      this.exportStatus.textContent = `exported ${manifest.exported} of ${manifest.total}`;
      this.retryBanner.hide();
    } catch (err) {
      if (err instanceof ApiError && err.status === 0) {
        this.retryBanner.show(err.message, "retry", () => this.queue(() => this.doExport()));
        return;
      }
      throw err;
    }
  }

  /** Map write failures onto the conflict banner (409, with a buffer diff
   *  in fix mode), inline violations (422), or the retry banner (offline). */
  private handleWriteError(err: unknown, id: string): void {
    if (!(err instanceof ApiError)) throw err;
    if (err.status === 409) {
      const reload = () =>
        this.queue(async () => {
          if (this.mode === "fix") {
            const fresh = await this.session.open(id);
            this.detail = fresh;
            this.session.clearDirty();
            await this.fix.render(fresh, this.api);
          } else {
            await this.openItem(id);
          }
          this.conflictBanner.hide();
          this.hideDiff();
          this.renderBrowse();
        });
      this.conflictBanner.show(err.message, "load server version", reload);
      if (this.mode === "fix") {
        this.queue(async () => {
          const fresh = await this.api.getItem(id);
          this.showDiff(this.fix.diffAgainst(fresh.trajectory));
        });
      }
      return;
    }
    if (err.status === 422 && err.code === "validation_failed") {
      this.fix.showViolations(err.violations);
      this.status(err.message);
      return;
    }
    if (err.status === 0) {
      // Writes are not retried blindly; the reviewer re-issues the action.
      this.retryBanner.show(err.message, "dismiss", () => this.retryBanner.hide());
      return;
    }
    this.status(`error: ${err.message}`);
  }

  private showDiff(lines: string[]): void {
    this.conflictDiff.textContent = "";
    for (const line of lines.length > 0 ? lines : ["no local changes differ from the server"]) {
      this.conflictDiff.appendChild(makeEl(this.doc, "div", "diff-line", line));
    }
    this.conflictDiff.classList.remove("hidden");
  }

  private hideDiff(): void {
    this.conflictDiff.classList.add("hidden");
    this.conflictDiff.textContent = "";
  }

  private onKeyDown(ev: KeyboardEvent): void {
    if (!this.root.isConnected) return;
    const target = ev.target as HTMLElement | null;
    const tag = target?.tagName ?? "";
    if (tag === "TEXTAREA" || tag === "INPUT" || tag === "SELECT") {
      if (ev.key === "Escape") target?.blur();
      return;
    }
    switch (ev.key) {
      case "j":
      case "ArrowDown":
        ev.preventDefault();
        this.queue(() => this.navigate(1));
        break;
      case "k":
      case "ArrowUp":
        ev.preventDefault();
        this.queue(() => this.navigate(-1));
        break;
      case "Enter": {
        if (this.mode !== "browse") return;
        const selected = this.session.selected();
        if (selected !== null) this.queue(() => this.openItem(selected.id));
        break;
      }
      case "Escape":
        if (this.mode === "fix") {
          this.queue(() => this.cancelFix());
        } else if (this.mode === "inspect") {
          this.setMode("browse");
          this.renderBrowse();
        }
        break;
      case "a":
        this.queue(() => this.decide("accept"));
        break;
      case "d":
        this.queue(() => this.decide("drop"));
        break;
      case "f":
        this.queue(() => this.enterFix());
        break;
      case "s":
        if (this.mode === "fix") this.queue(() => this.submitFix());
        break;
      case "e":
        if (this.mode !== "fix") this.queue(() => this.doExport());
        break;
      default:
        break;
    }
  }

  private async guarded(op: () => Promise<void>): Promise<void> {
    try {
      await op();
      this.retryBanner.hide();
    } catch (err) {
      if (err instanceof ApiError && err.status === 0) {
        this.retryBanner.show(err.message, "retry", () => this.queue(() => this.refreshList()));
        return;
      }
      throw err;
    }
  }
}
