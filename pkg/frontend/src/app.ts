/**
 * Browser entry point: wires the screen flow to the gateway API.
 * Keys are generated on first visit and kept in localStorage for the
 * study session; all signing happens here, never on the server.
 */

import { GatewayClient, ApiError, SeedCase, SessionView } from "./api.js";
import { AllocationDraft, QUADRATIC_TOOLTIP, VotingMethod } from "./allocation.js";
import { buildSignedVote } from "./ballot.js";
import {
  ClientIdentity,
  generateKeypair,
  loadIdentity,
  saveIdentity,
  toClientIdentity,
} from "./identity.js";
import { RoomChannel } from "./room.js";
import { Screen, screenForState, verifyReceipt } from "./screens.js";

interface AppConfig {
  apiBase: string;
  wsBase: string;
  proposalId: string;
  spaceId: string;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K, text?: string, className?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (text !== undefined) node.textContent = text;
  if (className) node.className = className;
  return node;
}

function guidance(parent: HTMLElement, message: string): void {
  const existing = parent.querySelector(".guidance");
  if (existing) existing.remove();
  parent.append(el("p", message, "guidance"));
}

export class ConsoleApp {
  private identity!: ClientIdentity;
  private session!: SessionView;
  private seedCase!: SeedCase;
  private channel: RoomChannel | null = null;
  private readonly client: GatewayClient;

  constructor(private readonly config: AppConfig, private readonly root: HTMLElement) {
    this.client = new GatewayClient(config.apiBase);
  }

  async start(): Promise<void> {
    let keys = await loadIdentity(localStorage);
    if (!keys) {
      keys = await generateKeypair();
      await saveIdentity(keys, localStorage);
    }
    this.identity = await toClientIdentity(keys);
    await this.client.register(this.identity.publicKeyHex);
    this.seedCase = await this.client.seedCase();
    this.session = await this.client.session(this.identity.address);
    this.render();
  }

  private async refresh(): Promise<void> {
    this.session = await this.client.session(this.identity.address);
    this.render();
  }

  private async tryAdvance(event: string, pane: HTMLElement): Promise<void> {
    try {
      this.session = await this.client.advance(this.identity.address, event);
      this.render();
    } catch (error) {
      if (error instanceof ApiError) guidance(pane, error.detail);
      else throw error;
    }
  }

  private render(): void {
    this.root.replaceChildren();
    const screen = screenForState(this.session.state);
    const pane = el("section", undefined, `screen screen-${screen.toLowerCase()}`);
    this.root.append(pane);
    const renderers: Record<Screen, (pane: HTMLElement) => void> = {
      Intro: (p) => this.renderIntro(p),
      ValuePrompt: (p) => this.renderValuePrompt(p),
      AiChat: (p) => this.renderAiChat(p),
      GroupRoom: (p) => this.renderGroupRoom(p),
      Survey: (p) => this.renderSurvey(p),
      Voting: (p) => void this.renderVoting(p),
      Receipt: (p) => void this.renderReceipt(p),
    };
    renderers[screen](pane);
  }

  private renderIntro(pane: HTMLElement): void {
    pane.append(el("h1", "Welcome"));
    pane.append(el("p",
      "You will review an AI interpretation of a short video, discuss it " +
      "one-on-one and in a small group, then vote on how the AI should improve."));
    const begin = el("button", "Begin");
    begin.onclick = async () => {
      if (this.session.state === "REGISTERED") {
        await this.tryAdvance("START_INTRO", pane);
      }
      await this.tryAdvance("INTRO_DONE", pane);
    };
    pane.append(begin);
  }

  private renderValuePrompt(pane: HTMLElement): void {
    pane.append(el("h1", this.seedCase.value_question));
    pane.append(el("blockquote", this.seedCase.interpretation_text));
    for (const answer of ["yes", "no", "maybe"]) {
      const button = el("button", answer);
      button.onclick = async () => {
        try {
          this.session = await this.client.answerValue(this.identity.address, answer);
          this.render();
        } catch (error) {
          if (error instanceof ApiError) guidance(pane, error.detail);
          else throw error;
        }
      };
      pane.append(button);
    }
  }

  private renderAiChat(pane: HTMLElement): void {
    pane.append(el("h1", "Talk it through"));
    const log = el("div", undefined, "chat-log");
    pane.append(log);
    const input = el("input");
    input.placeholder = "What matters to you about this interpretation?";
    const send = el("button", "Send");
    send.onclick = async () => {
      if (!input.value.trim()) return;
      const turn = await this.client.aiTurn(this.identity.address, input.value);
      log.append(el("p", `you: ${turn.prompt}`, "user"));
      log.append(el("p", `assistant: ${turn.reply}`, "assistant"));
      input.value = "";
      this.session = await this.client.session(this.identity.address);
    };
    const done = el("button", "Join the group room");
    done.onclick = () => this.tryAdvance("CHAT_DONE", pane);
    pane.append(input, send, done);
  }

  private renderGroupRoom(pane: HTMLElement): void {
    pane.append(el("h1", "Group discussion"));
    const topics = el("ul", undefined, "topics");
    for (const topic of this.seedCase.suggested_topics) topics.append(el("li", topic));
    pane.append(el("p", "Stuck? Suggested topics:"), topics);
    const log = el("div", undefined, "room-log");
    pane.append(log);

    if (!this.channel && this.session.room_id && this.client.token) {
      this.channel = new RoomChannel(
        this.config.wsBase, this.session.room_id, this.client.token, {
          onDeliver: (m) => log.append(el("p", `${m.author.slice(0, 10)}…: ${m.text}`)),
          onError: (detail) => guidance(pane, detail),
        },
      );
      this.channel.connect();
    }
    const input = el("input");
    const send = el("button", "Post");
    send.onclick = () => {
      if (input.value.trim()) this.channel?.post(input.value);
      input.value = "";
    };
    const done = el("button", "Continue to the survey");
    done.onclick = async () => {
      await this.tryAdvance("ROOM_DONE", pane);
      if (this.session.state !== "GROUP_ROOM") this.channel?.leave();
    };
    pane.append(input, send, done);
  }

  private renderSurvey(pane: HTMLElement): void {
    pane.append(el("h1", "Quick survey"));
    pane.append(el("p", "Rate the process so far, then continue to the vote."));
    const done = el("button", "Continue to voting");
    done.onclick = () => this.tryAdvance("SURVEY_DONE", pane);
    pane.append(done);
  }

  private async renderVoting(pane: HTMLElement): Promise<void> {
    const proposal = await this.client.proposal(this.config.proposalId);
    const space = await this.client.space(this.config.spaceId);
    const chain = await this.client.chainEvents();
    const mintEvent = chain.find((e) => e.kind === "MINT") as
      | { payload?: { grants?: Record<string, number> } }
      | undefined;
    const budget = mintEvent?.payload?.grants?.[this.identity.address] ?? 0;
    const method = space.voting_method as VotingMethod;
    const draft = new AllocationDraft(budget, proposal.options.length, method);

    pane.append(el("h1", "Cast your vote"));
    const remaining = el("p", `Tokens remaining: ${draft.remaining}`);
    pane.append(remaining);
    if (method === "QUADRATIC") {
      const hint = el("p", "4 tokens = 2 votes", "tooltip");
      hint.title = QUADRATIC_TOOLTIP;
      pane.append(hint);
    }

    const previews: HTMLElement[] = [];
    proposal.options.forEach((option, index) => {
      const row = el("div", undefined, "option-row");
      row.append(el("label", option));
      const input = el("input");
      input.type = "number";
      input.min = "0";
      input.value = "0";
      const preview = el("span", method === "QUADRATIC" ? "0.00 votes" : "0 votes");
      previews.push(preview);
      input.oninput = () => {
        const stored = draft.setAllocation(index, Number(input.value));
        input.value = String(stored);  // reflect the clamp immediately
        remaining.textContent = `Tokens remaining: ${draft.remaining}`;
        previews.forEach((node, j) => {
          node.textContent = `${draft.previewDisplay()[j]} votes`;
        });
      };
      row.append(input, preview);
      pane.append(row);
    });

    const cast = el("button", "Cast Vote");
    cast.onclick = async () => {
      try {
        const body = await buildSignedVote(
          this.identity, proposal.id, draft.allocations, Date.now(),
        );
        const receipt = await this.client.castVote(body);
        sessionStorage.setItem("agora.receipt", JSON.stringify(receipt));
        await this.tryAdvance("BALLOT_ACCEPTED", pane);
      } catch (error) {
        if (error instanceof ApiError) guidance(pane, error.detail);
        else throw error;
      }
    };
    pane.append(cast);
  }

  private async renderReceipt(pane: HTMLElement): Promise<void> {
    pane.append(el("h1", "Thank you for participating"));
    const stored = sessionStorage.getItem("agora.receipt");
    if (!stored) {
      pane.append(el("p", "Your session is complete."));
      return;
    }
    const receipt = JSON.parse(stored) as { seq: number; event_hash: string };
    const events = await this.client.chainEvents(receipt.seq);
    const view = verifyReceipt(receipt, events);
    pane.append(el("p", `Your ballot is event #${view.seq} on the public audit chain.`));
    pane.append(el("code", view.eventHash));
    pane.append(el("p", view.verified
      ? "Verified: the chain entry matches your receipt."
      : "Warning: the chain entry does not match your receipt."));
  }
}

export function mount(config: AppConfig): void {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app root element");
  const app = new ConsoleApp(config, root);
  void app.start();
}
