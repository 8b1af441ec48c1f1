/** Connection state and the library status snapshot behind the status view. */

import { ApiClient, ServiceUnreachable } from "./api.js";
import type { HealthReport } from "./types.js";

export interface ConnectionState {
  online: boolean;
  /* Present only while offline; shown in the banner. */
  reason: string | null;
  lastHealth: HealthReport | null;
}

/** Polls health and tracks whether the service is reachable. */
export class StatusModel {
  private state: ConnectionState = { online: false, reason: "not checked yet", lastHealth: null };

  constructor(private readonly client: ApiClient) {}

  /** Refresh from the service; going offline is recorded, never thrown. */
  async refresh(): Promise<ConnectionState> {
    try {
      const health = await this.client.health();
      this.state = { online: true, reason: null, lastHealth: health };
    } catch (err) {
      if (err instanceof ServiceUnreachable) {
        this.state = { online: false, reason: err.message, lastHealth: this.state.lastHealth };
      } else {
        throw err;
      }
    }
    return this.state;
  }

  current(): ConnectionState {
    return this.state;
  }
}
