/** Connection machine: transport, login, resume, reconnect with backoff.
 *
 * The client owns one ClientView and updates it only by folding received
 * frames through the reducer. On reconnect it resumes from the last seen
 * stream seq, so the view never gains duplicates or gaps.
 */

import { Frame, decodeFrame, encodeFrame, loginFrame } from "./protocol.js";
import { ClientView, apply, initialView } from "./state.js";

export interface Transport {
  send(line: string): void;
  close(): void;
  onLine(handler: (line: string) => void): void;
  onClose(handler: () => void): void;
  onOpen(handler: () => void): void;
}

export type TransportFactory = () => Transport;

export interface Credentials {
  user: string;
  password: string;
}

const BACKOFF_MS = [500, 1000, 2000, 4000, 8000];

export class MeetingClient {
  view: ClientView = initialView();
  private transport: Transport | null = null;
  private listeners: Array<(view: ClientView) => void> = [];
  private attempts = 0;
  private stopped = false;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private readonly makeTransport: TransportFactory,
    private readonly credentials: Credentials,
  ) {}

  get me(): string {
    return `user:${this.credentials.user}`;
  }

  subscribe(listener: (view: ClientView) => void): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  connect(): void {
    this.stopped = false;
    this.update({ ...this.view, conn: this.attempts ? "reconnecting" : "connecting" });
    const transport = this.makeTransport();
    this.transport = transport;
    transport.onOpen(() => {
      transport.send(
        encodeFrame(loginFrame(this.credentials.user, this.credentials.password, this.view.lastSeq)),
      );
    });
    transport.onLine((line) => this.receive(line));
    transport.onClose(() => {
      this.transport = null;
      if (this.stopped || this.view.conn === "auth-failed") {
        this.update({ ...this.view, conn: this.view.conn === "auth-failed" ? "auth-failed" : "closed" });
        return;
      }
      const delay = BACKOFF_MS[Math.min(this.attempts, BACKOFF_MS.length - 1)];
      this.attempts += 1;
      this.update({
        ...this.view,
        conn: "reconnecting",
        banner: `connection lost, retrying in ${delay / 1000}s`,
      });
      this.reconnectTimer = setTimeout(() => this.connect(), delay);
    });
  }

  stop(): void {
    this.stopped = true;
    if (this.reconnectTimer !== null) clearTimeout(this.reconnectTimer);
    this.transport?.close();
  }

  send(frame: Frame): void {
    if (this.view.conn !== "connected" || this.transport === null) {
      this.update({
        ...this.view,
        errors: [...this.view.errors, { at: "connection", code: "NotConnected", detail: frame.type }],
      });
      return;
    }
    this.transport.send(encodeFrame(frame));
  }

  private receive(line: string): void {
    if (!line.trim()) return;
    let frame: Frame;
    try {
      frame = decodeFrame(line);
    } catch {
      return; // tolerate garbage on the stream; the server never sends any
    }
    if (frame.type === "auth.hello") this.attempts = 0;
    this.update(apply(this.view, frame));
  }

  private update(view: ClientView): void {
    this.view = view;
    for (const listener of this.listeners) listener(view);
  }
}

/** Browser transport: the same LF-framed protocol over a WebSocket. */
export function webSocketTransport(url: string): TransportFactory {
  return () => {
    const socket = new WebSocket(url);
    let lineHandler: (line: string) => void = () => undefined;
    let closeHandler: () => void = () => undefined;
    let openHandler: () => void = () => undefined;
    socket.onopen = () => openHandler();
    socket.onclose = () => closeHandler();
    socket.onerror = () => socket.close();
    socket.onmessage = (event) => {
      for (const line of String(event.data).split("\n")) {
        if (line.trim()) lineHandler(line);
      }
    };
    return {
      send: (line) => socket.send(line),
      close: () => socket.close(),
      onLine: (h) => (lineHandler = h),
      onClose: (h) => (closeHandler = h),
      onOpen: (h) => (openHandler = h),
    };
  };
}
