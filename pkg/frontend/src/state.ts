import type { ApiClient } from "./api.js";
import type {
  DecisionAction,
  ExportManifest,
  ItemDetail,
  ItemStatus,
  ItemSummary,
  TrajectoryBody,
} from "./types.js";

export interface SessionOptions {
  reviewer: string;
  pageSize?: number;
}

/** Client-side review state: the current filter and page, the cached item
 *  list, the selection, the last version seen for each item, and whether
 *  an edit buffer holds unsubmitted changes. Navigation is refused while
 *  the buffer is dirty — it must be submitted or discarded first — and
 *  every write goes out with the last known version for its item. */
export class ReviewSession {
  readonly reviewer: string;
  readonly pageSize: number;
  filter: ItemStatus | null = null;
  page = 1;
  items: ItemSummary[] = [];
  total = 0;
  selectedIndex = -1;
  dirty = false;

  private readonly api: ApiClient;
  private readonly versions = new Map<string, number>();

  constructor(api: ApiClient, options: SessionOptions) {
    this.api = api;
    this.reviewer = options.reviewer;
    this.pageSize = options.pageSize ?? 20;
  }

  async refresh(): Promise<void> {
    const result = await this.api.listItems({
      status: this.filter ?? undefined,
      page: this.page,
      pageSize: this.pageSize,
    });
    const previousId = this.selected()?.id ?? null;
    this.items = result.items;
    this.total = result.total;
    this.page = result.page;
    for (const item of result.items) {
      this.versions.set(item.id, item.version);
    }
    if (this.items.length === 0) {
      this.selectedIndex = -1;
    } else if (previousId !== null) {
      const index = this.items.findIndex((item) => item.id === previousId);
      this.selectedIndex =
        index >= 0 ? index : Math.min(Math.max(this.selectedIndex, 0), this.items.length - 1);
    } else {
      this.selectedIndex = 0;
    }
  }

  selected(): ItemSummary | null {
    if (this.selectedIndex < 0 || this.selectedIndex >= this.items.length) return null;
    return this.items[this.selectedIndex];
  }

  canNavigate(): boolean {
    return !this.dirty;
  }

  markDirty(): void {
    this.dirty = true;
  }

  clearDirty(): void {
    this.dirty = false;
  }

  next(): boolean {
    if (this.dirty || this.items.length === 0) return false;
    this.selectedIndex = Math.min(this.selectedIndex + 1, this.items.length - 1);
    return true;
  }

  prev(): boolean {
    if (this.dirty || this.items.length === 0) return false;
    this.selectedIndex = Math.max(this.selectedIndex - 1, 0);
    return true;
  }

  totalPages(): number {
    return Math.max(1, Math.ceil(this.total / this.pageSize));
  }

  async setFilter(status: ItemStatus | null): Promise<boolean> {
    if (this.dirty) return false;
    this.filter = status;
    this.page = 1;
    this.selectedIndex = -1;
    await this.refresh();
    return true;
  }

  async nextPage(): Promise<boolean> {
    if (this.dirty || this.page >= this.totalPages()) return false;
    this.page += 1;
    this.selectedIndex = -1;
    await this.refresh();
    return true;
  }

  async prevPage(): Promise<boolean> {
    if (this.dirty || this.page <= 1) return false;
    this.page -= 1;
    this.selectedIndex = -1;
    await this.refresh();
    return true;
  }

  knownVersion(id: string): number {
    const version = this.versions.get(id);
    if (version === undefined) {
      throw new Error(`no known version for item ${id}`);
    }
    return version;
  }

  async open(id: string): Promise<ItemDetail> {
    const detail = await this.api.getItem(id);
    this.recordSummary(detail.item);
    return detail;
  }

  async decide(id: string, action: DecisionAction): Promise<ItemSummary> {
    const updated = await this.api.decide(id, action, this.reviewer, this.knownVersion(id));
    this.recordSummary(updated);
    return updated;
  }

  async submitEdit(id: string, trajectory: TrajectoryBody): Promise<ItemSummary> {
    const updated = await this.api.saveBody(id, trajectory, this.reviewer, this.knownVersion(id));
    this.recordSummary(updated);
    this.clearDirty();
    return updated;
  }

  exportCurated(path: string): Promise<ExportManifest> {
    return this.api.exportCurated(path);
  }

  private recordSummary(summary: ItemSummary): void {
    this.versions.set(summary.id, summary.version);
    const index = this.items.findIndex((item) => item.id === summary.id);
    if (index >= 0) this.items[index] = summary;
  }
}
