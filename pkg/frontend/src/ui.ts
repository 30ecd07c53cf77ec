/** DOM rendering: the page is a pure projection of the ClientView. */

import { MeetingClient } from "./client.js";
import { requests } from "./protocol.js";
import { ClientView, transcriptInOrder } from "./state.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  if (text) node.textContent = text;
  return node;
}

function shortName(agentId: string): string {
  return agentId.replace(/^user:/, "");
}

export class MeetingRoom {
  private pollCounter = 0;

  constructor(
    private readonly root: HTMLElement,
    private readonly client: MeetingClient,
  ) {
    client.subscribe((view) => this.render(view));
  }

  private render(view: ClientView): void {
    this.root.replaceChildren(
      this.banner(view),
      this.sidebar(view),
      this.chatPanel(view),
      this.pollsPanel(view),
    );
  }

  private banner(view: ClientView): HTMLElement {
    const banner = el("header", { class: `banner ${view.conn}` });
    banner.append(el("strong", {}, "placid meeting room"));
    banner.append(el("span", { class: "conn" }, view.conn + (view.agent ? ` as ${shortName(view.agent)}` : "")));
    if (view.banner) banner.append(el("span", { class: "notice" }, view.banner));
    return banner;
  }

  private sidebar(view: ClientView): HTMLElement {
    const aside = el("aside", { class: "sidebar" });

    const roster = el("section", { class: "roster" });
    roster.append(el("h2", {}, view.session ? `roster — ${view.session}` : "no session"));
    const list = el("ul");
    for (const [user, presence] of Object.entries(view.roster)) {
      const item = el("li", { class: presence }, `${shortName(user)} (${presence})`);
      list.append(item);
    }
    roster.append(list);
    aside.append(roster);

    const controls = el("section", { class: "session-controls" });
    const openForm = el("form", { id: "open-form" });
    const sessionInput = el("input", { placeholder: "session id", value: "room-1" });
    const usersInput = el("input", { placeholder: "participants (comma separated)" });
    const openButton = el("button", { type: "submit" }, "open session");
    openForm.append(sessionInput, usersInput, openButton);
    openForm.onsubmit = (event) => {
      event.preventDefault();
      const participants = usersInput.value.split(",").map((s) => s.trim()).filter(Boolean);
      this.client.send(requests.openSession(this.client.me, sessionInput.value, participants));
    };
    controls.append(openForm);
    if (view.session && view.sessionState === "active") {
      const closeButton = el("button", {}, "close session");
      closeButton.onclick = () => this.client.send(requests.closeSession(this.client.me, view.session!));
      const leaveButton = el("button", {}, "leave");
      leaveButton.onclick = () => this.client.send(requests.leave(this.client.me, view.session!));
      controls.append(closeButton, leaveButton);
    }
    aside.append(controls);

    const agenda = el("section", { class: "agenda" });
    agenda.append(el("h2", {}, "agenda"));
    const entries = el("ul");
    for (const item of view.agenda) {
      entries.append(el("li", {}, `${item.title || item.id} → ${item.session} @ tick ${item.startTick}`));
    }
    agenda.append(entries);
    const scheduleForm = el("form");
    const titleInput = el("input", { placeholder: "title" });
    const tickInput = el("input", { placeholder: "start tick", type: "number" });
    const scheduleButton = el("button", { type: "submit" }, "schedule");
    scheduleForm.append(titleInput, tickInput, scheduleButton);
    scheduleForm.onsubmit = (event) => {
      event.preventDefault();
      const startTick = parseInt(tickInput.value, 10);
      if (Number.isNaN(startTick)) return;
      const entry = `e-${Date.now() % 100000}`;
      this.client.send(
        requests.schedule(this.client.me, entry, `s-${entry}`, titleInput.value, startTick, []),
      );
    };
    agenda.append(scheduleForm);
    aside.append(agenda);
    return aside;
  }

  private chatPanel(view: ClientView): HTMLElement {
    const main = el("main", { class: "chat" });
    const log = el("ol", { class: "transcript" });
    for (const entry of transcriptInOrder(view)) {
      const row = el("li");
      row.append(
        el("span", { class: "seq" }, `#${entry.seq}`),
        el("span", { class: "author" }, shortName(entry.author)),
        el("span", { class: "text" }, entry.text),
      );
      log.append(row);
    }
    main.append(log);
    const chatErrors = view.errors.filter((e) => e.at === "chat" || e.at === "connection").slice(-3);
    for (const error of chatErrors) {
      main.append(el("p", { class: "inline-error" }, `${error.code}: ${error.detail}`));
    }
    const composer = el("form", { class: "composer" });
    const input = el("input", { placeholder: "say something…", id: "composer-input" });
    const send = el("button", { type: "submit" }, "send");
    composer.append(input, send);
    composer.onsubmit = (event) => {
      event.preventDefault();
      if (!view.session || !input.value.trim()) return;
      this.client.send(requests.post(this.client.me, view.session, input.value));
      input.value = "";
    };
    main.append(composer);
    return main;
  }

  private pollsPanel(view: ClientView): HTMLElement {
    const panel = el("section", { class: "polls" });
    panel.append(el("h2", {}, "polls"));
    for (const poll of Object.values(view.polls)) {
      const card = el("article", { class: `poll ${poll.state}` });
      card.append(el("h3", {}, poll.question || poll.id));
      const options = el("ul");
      poll.options.forEach((option, index) => {
        const row = el("li");
        const count = el("span", { class: "count" }, String(poll.counts[index] ?? 0));
        if (poll.state === "open") {
          const button = el("button", {}, option);
          button.onclick = () =>
            this.client.send(requests.castBallot(this.client.me, poll.session, poll.id, index));
          if (poll.myBallot === index) button.classList.add("mine");
          row.append(button);
        } else {
          const label = el("span", {}, option);
          if (poll.winners?.includes(option)) label.classList.add("winner");
          row.append(label);
        }
        row.append(count);
        options.append(row);
      });
      card.append(options);
      if (poll.state === "closed") {
        card.append(el("p", { class: "status" }, `${poll.status}: ${poll.winners?.join(", ")}`));
      } else {
        const close = el("button", {}, "close poll");
        close.onclick = () => this.client.send(requests.closePoll(this.client.me, poll.session, poll.id));
        card.append(close);
      }
      for (const error of view.errors.filter((e) => e.at === `poll:${poll.id}`).slice(-1)) {
        card.append(el("p", { class: "inline-error" }, `${error.code}: ${error.detail}`));
      }
      panel.append(card);
    }
    if (view.session && view.sessionState === "active") {
      const form = el("form", { class: "new-poll" });
      const question = el("input", { placeholder: "question" });
      const optionsInput = el("input", { placeholder: "options (comma separated)" });
      const openButton = el("button", { type: "submit" }, "open poll");
      form.append(question, optionsInput, openButton);
      form.onsubmit = (event) => {
        event.preventDefault();
        const options = optionsInput.value.split(",").map((s) => s.trim()).filter(Boolean);
        this.pollCounter += 1;
        this.client.send(
          requests.openPoll(this.client.me, view.session!, `p-${this.pollCounter}`, question.value, options),
        );
      };
      panel.append(form);
    }
    return panel;
  }
}
