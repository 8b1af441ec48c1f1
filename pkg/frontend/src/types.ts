/** Wire types mirroring the service's JSON payloads, field for field. */

export interface RankedLabel {
  label: string;
  score: number;
}

export interface DiagnosisResponse {
  ranked_labels: RankedLabel[];
  cscore: number | null;
  reliable: boolean | null;
  theta: number | null;
  generation: number;
  timing_ms: number;
  per_pass_votes: Record<string, number> | null;
}

export interface RetrieveHit {
  item_id: number;
  score: number;
  external_ref: string;
  source_tag: string;
}

export interface RetrieveResponse {
  hits: RetrieveHit[];
  generation: number;
}

export interface CurvePoint {
  theta: number;
  sensitivity: number;
  specificity: number;
  j: number;
}

export interface CalibrationResponse {
  theta_star: number;
  positives: number;
  negatives: number;
  curve: CurvePoint[];
  generation: number;
}

export interface AugmentResponse {
  old_generation: number;
  new_generation: number;
  added: number;
}

export interface HealthReport {
  generation: number;
  dim: number;
  item_count: number;
  by_provenance: { base: number; local: number };
  theta_star: number | null;
  case_store: boolean;
}

export interface EvaluationReport {
  topk: Record<string, number>;
  recall: Record<string, Record<string, number>>;
  macro_recall: Record<string, number>;
  confusion: number[][];
  n: number;
}

export interface MetricsReport extends HealthReport {
  last_evaluation: EvaluationReport | null;
}

export interface ScoredPair {
  cscore: number;
  correct: boolean;
}

export interface ApiErrorBody {
  code: string;
  message: string;
  detail: Record<string, unknown>;
}

export interface DiagnoseRequest {
  vector?: number[];
  image_b64?: string;
  k?: number;
  n?: number;
  theta?: number;
}

export interface ReviewSheetJson {
  queries: {
    query_id: string;
    candidates: number[];
    verdicts: Record<string, boolean[]>;
  }[];
}
