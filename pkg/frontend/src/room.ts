/**
 * Group-room realtime channel: join/post/deliver/leave JSON frames over
 * one WebSocket per room. Frame codecs are pure so they can be tested
 * without a socket; delivery order is the server's per-room sequence.
 */

export type RoomFrame =
  | { type: "join"; token: string }
  | { type: "post"; text: string }
  | { type: "leave" }
  | { type: "joined"; room_id: string; suggested_topics: string[] }
  | { type: "deliver"; room_id: string; seq: number; author: string; text: string; at: number }
  | { type: "error"; detail: string };

export function encodeFrame(frame: RoomFrame): string {
  return JSON.stringify(frame);
}

export function decodeFrame(raw: string): RoomFrame {
  const frame = JSON.parse(raw) as RoomFrame;
  if (!frame || typeof frame !== "object" || typeof frame.type !== "string") {
    throw new Error("malformed room frame");
  }
  return frame;
}

export interface RoomHandlers {
  onJoined?(topics: string[]): void;
  onDeliver?(message: Extract<RoomFrame, { type: "deliver" }>): void;
  onError?(detail: string): void;
}

/** Orders deliveries defensively: drops anything out of sequence. */
export class DeliveryLog {
  readonly messages: Extract<RoomFrame, { type: "deliver" }>[] = [];

  accept(frame: Extract<RoomFrame, { type: "deliver" }>): boolean {
    const expected = this.messages.length === 0
      ? frame.seq
      : this.messages[this.messages.length - 1]!.seq + 1;
    if (frame.seq !== expected) return false;
    this.messages.push(frame);
    return true;
  }
}

export class RoomChannel {
  private socket: WebSocket | null = null;
  readonly log = new DeliveryLog();

  constructor(
    readonly wsBaseUrl: string,
    readonly roomId: string,
    readonly token: string,
    readonly handlers: RoomHandlers = {},
  ) {}

  connect(): void {
    const socket = new WebSocket(`${this.wsBaseUrl}/v1/rooms/${this.roomId}/channel`);
    socket.onopen = () => socket.send(encodeFrame({ type: "join", token: this.token }));
    socket.onmessage = (event) => {
      const frame = decodeFrame(String(event.data));
      if (frame.type === "joined") this.handlers.onJoined?.(frame.suggested_topics);
      else if (frame.type === "deliver") {
        if (this.log.accept(frame)) this.handlers.onDeliver?.(frame);
      } else if (frame.type === "error") this.handlers.onError?.(frame.detail);
    };
    this.socket = socket;
  }

  post(text: string): void {
    if (!this.socket || this.socket.readyState !== WebSocket.OPEN) {
      throw new Error("room channel is not connected");
    }
    this.socket.send(encodeFrame({ type: "post", text }));
  }

  leave(): void {
    if (this.socket && this.socket.readyState === WebSocket.OPEN) {
      this.socket.send(encodeFrame({ type: "leave" }));
      this.socket.close();
    }
    this.socket = null;
  }
}
