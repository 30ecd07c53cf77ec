/** Wire frames: one JSON object per LF-terminated line, protocol v1. */

export type Performative = "inform" | "diffuse" | "ask" | "answer" | "confirm";

export interface Frame {
  v: 1;
  perf: Performative;
  from: string;
  to: string[];
  type: string;
  conv?: string;
  seq?: number;
  body: any;
}

export const GATEWAY = "agent:gateway";
export const HOST = "agent:papoticiel";
export const CHAT = "agent:com";
export const VOTE = "agent:vote";
export const AGENDA = "agent:agenda";

export function encodeFrame(frame: Frame): string {
  // Client frames never carry seq; the server is the order authority.
  const { seq, conv, ...rest } = frame;
  const ordered: Record<string, unknown> = {
    v: rest.v,
    perf: rest.perf,
    from: rest.from,
    to: rest.to,
    type: rest.type,
  };
  if (conv !== undefined) ordered.conv = conv;
  ordered.body = rest.body;
  return JSON.stringify(ordered) + "\n";
}

export function decodeFrame(line: string): Frame {
  const data = JSON.parse(line);
  if (data.v !== 1) throw new Error(`unsupported protocol version: ${data.v}`);
  if (typeof data.perf !== "string" || typeof data.type !== "string" || !Array.isArray(data.to)) {
    throw new Error("malformed frame");
  }
  return data as Frame;
}

function ask(from: string, to: string, type: string, body: any): Frame {
  return { v: 1, perf: "ask", from, to: [to], type, body };
}

export function loginFrame(user: string, password: string, resumeFrom: number): Frame {
  return ask(`user:${user}`, GATEWAY, "auth.login", {
    user,
    password,
    resume_from: resumeFrom,
  });
}

export const requests = {
  openSession: (me: string, session: string, participants: string[], title = "") =>
    ask(me, HOST, "session.open", { session, participants, title }),
  presences: (me: string, session: string) => ask(me, HOST, "session.presences", { session }),
  closeSession: (me: string, session: string) => ask(me, HOST, "session.close", { session }),
  post: (me: string, session: string, text: string) => ask(me, CHAT, "chat.post", { session, text }),
  openPoll: (me: string, session: string, poll: string, question: string, options: string[]) =>
    ask(me, VOTE, "vote.open", { session, poll, question, options }),
  castBallot: (me: string, session: string, poll: string, option: number) =>
    ask(me, VOTE, "vote.cast", { session, poll, option }),
  closePoll: (me: string, session: string, poll: string) => ask(me, VOTE, "vote.close", { session, poll }),
  schedule: (me: string, entry: string, session: string, title: string, startTick: number, participants: string[]) =>
    ask(me, AGENDA, "agenda.schedule", {
      entry,
      session,
      title,
      start_tick: startTick,
      participants,
      auto_start: true,
    }),
  leave: (me: string, session: string): Frame => ({
    v: 1,
    perf: "diffuse",
    from: me,
    to: [HOST],
    type: "session.leave",
    body: { session },
  }),
};
