/** Retrieval gallery: ranked hits per query with per-reviewer relevance toggles. */

import type { RetrieveHit, ReviewSheetJson } from "./types.js";

export interface GalleryRow {
  queryId: string;
  hits: RetrieveHit[];
  /* reviewer -> one flag per hit, in hit order. */
  verdicts: Map<string, boolean[]>;
}

/**
 * Collects reviewer verdicts over retrieved candidates. The reviewer roster is
 * fixed up front so every query carries the same verdict columns, which is what
 * the export format requires.
 */
export class RetrievalGallery {
  private rows = new Map<string, GalleryRow>();
  readonly reviewers: string[];

  constructor(reviewers: string[]) {
    if (reviewers.length === 0) {
      throw new Error("gallery needs at least one reviewer");
    }
    if (new Set(reviewers).size !== reviewers.length) {
      throw new Error("duplicate reviewer names");
    }
    this.reviewers = reviewers.slice();
  }

  /** Register a query's hit list; every verdict starts out not-relevant. */
  add(queryId: string, hits: RetrieveHit[]): GalleryRow {
    if (this.rows.has(queryId)) {
      throw new Error(`query ${queryId} already in gallery`);
    }
    if (hits.length === 0) {
      throw new Error(`query ${queryId} has no hits`);
    }
    const verdicts = new Map<string, boolean[]>();
    for (const reviewer of this.reviewers) {
      verdicts.set(reviewer, hits.map(() => false));
    }
    const row: GalleryRow = { queryId, hits: hits.slice(), verdicts };
    this.rows.set(queryId, row);
    return row;
  }

  /** Toggle one candidate's relevance for one reviewer; rank is 0-based. */
  setVerdict(queryId: string, reviewer: string, rank: number, relevant: boolean): void {
    const row = this.rows.get(queryId);
    if (row === undefined) {
      throw new Error(`query ${queryId} is not in the gallery`);
    }
    const flags = row.verdicts.get(reviewer);
    if (flags === undefined) {
      throw new Error(`unknown reviewer ${reviewer}`);
    }
    if (rank < 0 || rank >= flags.length) {
      throw new Error(`rank ${rank} out of range for query ${queryId}`);
    }
    flags[rank] = relevant;
  }

  row(queryId: string): GalleryRow | undefined {
    return this.rows.get(queryId);
  }

  queries(): GalleryRow[] {
    return [...this.rows.values()];
  }

  /** Export all verdicts in the review sheet wire format. */
  toReviewSheet(): ReviewSheetJson {
    if (this.rows.size === 0) {
      throw new Error("nothing to export");
    }
    const queries = [...this.rows.values()].map((row) => ({
      query_id: row.queryId,
      candidates: row.hits.map((hit) => hit.item_id),
      verdicts: Object.fromEntries(
        this.reviewers.map((reviewer) => [reviewer, (row.verdicts.get(reviewer) as boolean[]).slice()]),
      ),
    }));
    return { queries };
  }
}
