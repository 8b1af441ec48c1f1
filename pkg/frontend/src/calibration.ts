/** Calibration panel model: parse a scored file, submit it, hold the response. */

import type { ApiClient } from "./api.js";
import type { CalibrationResponse, CurvePoint, ScoredPair } from "./types.js";

export class ScoredFileError extends Error {
  constructor(line: number, reason: string) {
    super(`line ${line}: ${reason}`);
    this.name = "ScoredFileError";
  }
}

/**
 * Parse a scored JSONL upload into pairs for the calibrate endpoint. This is
 * shape checking only; every number in the panel comes back from the service.
 */
export function parseScoredFile(text: string): ScoredPair[] {
  const pairs: ScoredPair[] = [];
  const lines = text.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (line === "") {
      continue;
    }
    let record: unknown;
    try {
      record = JSON.parse(line);
    } catch {
      throw new ScoredFileError(i + 1, "not valid JSON");
    }
    if (typeof record !== "object" || record === null || Array.isArray(record)) {
      throw new ScoredFileError(i + 1, "expected an object");
    }
    const { cscore, correct } = record as Record<string, unknown>;
    if (typeof cscore !== "number" || !Number.isFinite(cscore)) {
      throw new ScoredFileError(i + 1, "cscore must be a finite number");
    }
    if (typeof correct !== "boolean") {
      throw new ScoredFileError(i + 1, "correct must be a boolean");
    }
    pairs.push({ cscore, correct });
  }
  if (pairs.length === 0) {
    throw new ScoredFileError(0, "file has no records");
  }
  return pairs;
}

/** Holds the last calibration the service computed; no local math. */
export class CalibrationPanel {
  private last: CalibrationResponse | null = null;

  constructor(private readonly client: ApiClient) {}

  async upload(text: string): Promise<CalibrationResponse> {
    const pairs = parseScoredFile(text);
    this.last = await this.client.calibrate(pairs);
    return this.last;
  }

  thetaStar(): number | null {
    return this.last === null ? null : this.last.theta_star;
  }

  curveRows(): CurvePoint[] {
    return this.last === null ? [] : this.last.curve;
  }

  result(): CalibrationResponse | null {
    return this.last;
  }
}
