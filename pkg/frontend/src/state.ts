/** The meeting-room view, derived purely from received frames.
 *
 * `apply` is a pure reducer: folding the same frame stream always rebuilds
 * the same view (refresh-safe), the transcript is keyed by server-assigned
 * seq and rendered in ascending order, and nothing is ever invented
 * client-side — own posts appear only once the seq-bearing answer returns.
 */

import { Frame } from "./protocol.js";

export type ConnState = "idle" | "connecting" | "connected" | "auth-failed" | "reconnecting" | "closed";

export interface ChatEntry {
  seq: number;
  author: string;
  text: string;
  tick: number;
}

export interface PollView {
  id: string;
  session: string;
  question: string;
  options: string[];
  counts: number[];
  state: "open" | "closed";
  winners?: string[];
  status?: "decided" | "tie";
  myBallot?: number;
}

export interface AgendaItem {
  id: string;
  session: string;
  title: string;
  startTick: number;
}

export interface InlineError {
  at: string; // which widget: "poll:p1", "chat", "session", ...
  code: string;
  detail: string;
}

export interface ClientView {
  conn: ConnState;
  agent: string | null;
  lastSeq: number;
  banner: string | null;
  session: string | null;
  sessionState: "active" | "closed" | null;
  roster: Record<string, "present" | "absent">;
  transcript: Record<number, ChatEntry>;
  polls: Record<string, PollView>;
  agenda: AgendaItem[];
  errors: InlineError[];
}

export function initialView(): ClientView {
  return {
    conn: "idle",
    agent: null,
    lastSeq: 0,
    banner: null,
    session: null,
    sessionState: null,
    roster: {},
    transcript: {},
    polls: {},
    agenda: [],
    errors: [],
  };
}

export function transcriptInOrder(view: ClientView): ChatEntry[] {
  return Object.keys(view.transcript)
    .map(Number)
    .sort((a, b) => a - b)
    .map((seq) => view.transcript[seq]);
}

function pushError(view: ClientView, at: string, code: string, detail: string): ClientView {
  return { ...view, errors: [...view.errors, { at, code, detail }].slice(-20) };
}

function withPoll(view: ClientView, id: string, patch: Partial<PollView>): ClientView {
  const poll = view.polls[id];
  if (!poll) return view;
  return { ...view, polls: { ...view.polls, [id]: { ...poll, ...patch } } };
}

function addMessage(view: ClientView, entry: ChatEntry): ClientView {
  return { ...view, transcript: { ...view.transcript, [entry.seq]: entry } };
}

function applyAnswer(view: ClientView, frame: Frame): ClientView {
  const body = frame.body ?? {};
  if (body.ok === false) {
    const at =
      body.poll !== undefined
        ? `poll:${body.poll}`
        : frame.type.startsWith("chat.")
          ? "chat"
          : frame.type.startsWith("agenda.")
            ? "agenda"
            : "session";
    return pushError(view, at, body.error ?? "Error", body.detail ?? "");
  }
  switch (frame.type) {
    case "session.open":
      return {
        ...view,
        session: body.session,
        sessionState: "active",
        roster: body.roster ?? view.roster,
      };
    case "session.presences":
      return { ...view, roster: body.roster ?? view.roster };
    case "chat.post":
      return addMessage(view, {
        seq: body.seq,
        author: body.author,
        text: body.text,
        tick: body.tick ?? 0,
      });
    case "vote.cast":
      return withPoll(view, body.poll, { myBallot: body.option });
    case "agenda.schedule":
      return {
        ...view,
        agenda: [
          ...view.agenda,
          {
            id: body.entry,
            session: body.session ?? "",
            title: body.title ?? "",
            startTick: body.start_tick,
          },
        ],
      };
    default:
      return view;
  }
}

export function apply(view: ClientView, frame: Frame): ClientView {
  if (typeof frame.seq === "number" && frame.seq > view.lastSeq) {
    view = { ...view, lastSeq: frame.seq };
  }
  const body = frame.body ?? {};
  switch (frame.type) {
    case "auth.hello":
      return { ...view, conn: "connected", agent: body.agent, banner: null };
    case "auth.failed":
      return { ...view, conn: "auth-failed", banner: `login failed: ${body.error}` };
    case "gateway.error":
      return pushError(view, "connection", body.error ?? "GatewayError", body.detail ?? "");
    case "session.invite":
      // our in-platform agent confirms; we just follow the meeting
      return view.session === null ? { ...view, session: body.session, sessionState: "active" } : view;
    case "session.presence":
      if (body.session !== view.session) return view;
      return { ...view, roster: body.roster ?? view.roster };
    case "chat.msg":
      if (body.session !== view.session) return view;
      return addMessage(view, {
        seq: body.seq,
        author: body.author,
        text: body.text,
        tick: body.tick ?? 0,
      });
    case "chat.backlog": {
      if (body.session !== view.session) return view;
      let next = view;
      for (const entry of body.messages ?? []) {
        next = addMessage(next, {
          seq: entry.seq,
          author: entry.author,
          text: entry.text,
          tick: entry.tick ?? 0,
        });
      }
      return next;
    }
    case "chat.closed":
      if (body.session !== view.session) return view;
      return { ...view, sessionState: "closed" };
    case "vote.opened":
      if (body.session !== view.session) return view;
      return {
        ...view,
        polls: {
          ...view.polls,
          [body.poll]: {
            id: body.poll,
            session: body.session,
            question: body.question,
            options: body.options,
            counts: body.options.map(() => 0),
            state: "open",
          },
        },
      };
    case "vote.ballot":
      return withPoll(view, body.poll, { counts: body.counts });
    case "vote.outcome":
      return withPoll(view, body.poll, {
        state: "closed",
        counts: body.counts,
        winners: body.winners,
        status: body.status,
      });
    case "conv.timeout":
      return pushError(view, "connection", "Timeout", `no reply to ${body.type}`);
    default:
      if (frame.perf === "answer") return applyAnswer(view, frame);
      return view;
  }
}
