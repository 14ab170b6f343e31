/**
 * Thin typed client over the gateway's /v1 JSON API. Errors carry the
 * HTTP status and the server's detail string so screens can surface
 * 409s as in-place guidance; nothing is retried silently.
 */

import { VoteWireBody } from "./ballot.js";

export class ApiError extends Error {
  constructor(readonly status: number, readonly detail: string) {
    super(`HTTP ${status}: ${detail}`);
  }
}

export interface RegisterResponse {
  address: string;
  token: string;
  expires_at: number;
}

export interface SeedCase {
  interpretation_text: string;
  value_question: string;
  branch_seeds: Record<string, string>;
  suggested_topics: string[];
}

export interface SessionView {
  participant: string;
  state: string;
  value_answer: string | null;
  room_id: string | null;
  transcript_len: number;
  user_turns: number;
}

export interface ProposalView {
  id: string;
  space_id: string;
  options: string[];
  open_at: number;
  close_at: number;
  status: string;
  snapshot_ref: string;
}

export interface SpaceView {
  id: string;
  voting_method: "WEIGHTED" | "QUADRATIC";
  power_policy: { kind: string; total_supply: number; rng_seed: number };
  admins: string[];
  moderators: string[];
  vote_duration_ms: number;
  success_threshold: string;
}

export interface VoteReceipt {
  accepted: boolean;
  seq: number;
  event_hash: string;
}

export interface ResultView {
  proposal_id: string;
  method: string;
  scores: number[];
  turnout: number;
  total_effective: number;
  winners: number[];
  is_tie: boolean;
  succeeded: boolean[];
}

export interface ChainEventView {
  seq: number;
  ts: number;
  kind: string;
  prev_hash: string;
  hash: string;
  payload?: unknown;
  payload_sealed?: string;
  proposal_id?: string;
}

export interface AiTurnView {
  prompt: string;
  reply: string;
  latency_ms: number;
  fallback_used: boolean;
}

export class GatewayClient {
  token: string | null = null;

  constructor(readonly baseUrl: string) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = { "Content-Type": "application/json" };
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    const response = await fetch(this.baseUrl + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const parsed = (await response.json()) as { detail?: string };
        if (parsed.detail) detail = parsed.detail;
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  async register(publicKeyHex: string): Promise<RegisterResponse> {
    const info = await this.request<RegisterResponse>("POST", "/v1/register", {
      public_key: publicKeyHex,
    });
    this.token = info.token;
    return info;
  }

  seedCase(): Promise<SeedCase> {
    return this.request("GET", "/v1/seed-case");
  }

  session(address: string): Promise<SessionView> {
    return this.request("GET", `/v1/sessions/${address}`);
  }

  advance(address: string, event: string): Promise<SessionView> {
    return this.request("POST", `/v1/sessions/${address}/advance`, { event });
  }

  answerValue(address: string, answer: string): Promise<SessionView> {
    return this.request("POST", `/v1/sessions/${address}/value-answer`, { answer });
  }

  aiTurn(address: string, text: string): Promise<AiTurnView> {
    return this.request("POST", `/v1/sessions/${address}/ai-turn`, { text });
  }

  space(spaceId: string): Promise<SpaceView> {
    return this.request("GET", `/v1/spaces/${spaceId}`);
  }

  proposal(proposalId: string): Promise<ProposalView> {
    return this.request("GET", `/v1/proposals/${proposalId}`);
  }

  castVote(body: VoteWireBody): Promise<VoteReceipt> {
    return this.request("POST", `/v1/proposals/${body.proposal_id}/votes`, body);
  }

  result(proposalId: string): Promise<ResultView> {
    return this.request("GET", `/v1/proposals/${proposalId}/result`);
  }

  async chainEvents(fromSeq = 0): Promise<ChainEventView[]> {
    const body = await this.request<{ events: ChainEventView[] }>(
      "GET", `/v1/chain?from=${fromSeq}`,
    );
    return body.events;
  }

  // admin operations, used by operator tooling and the e2e suite
  createSpace(body: unknown): Promise<SpaceView> {
    return this.request("POST", "/v1/spaces", body);
  }

  mint(spaceId: string, participants: string[]): Promise<unknown> {
    return this.request("POST", `/v1/spaces/${spaceId}/mint`, { participants });
  }

  openProposal(spaceId: string, id: string, options: string[]): Promise<ProposalView> {
    return this.request("POST", `/v1/spaces/${spaceId}/proposals`, { id, options });
  }

  closeProposal(proposalId: string, force = false): Promise<ProposalView> {
    return this.request("POST", `/v1/proposals/${proposalId}/close`, { force });
  }

  publish(proposalId: string): Promise<ResultView> {
    return this.request("POST", `/v1/proposals/${proposalId}/publish`);
  }
}
