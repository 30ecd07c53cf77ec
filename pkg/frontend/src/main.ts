import { MeetingClient, webSocketTransport } from "./client.js";
import { MeetingRoom } from "./ui.js";

function wsUrl(): string {
  const proto = location.protocol === "https:" ? "wss" : "ws";
  return `${proto}://${location.host}/ws`;
}

function boot(): void {
  const loginRoot = document.getElementById("login")!;
  const roomRoot = document.getElementById("room")!;
  const form = loginRoot.querySelector("form")!;
  form.onsubmit = (event) => {
    event.preventDefault();
    const user = (form.querySelector('[name="user"]') as HTMLInputElement).value.trim();
    const password = (form.querySelector('[name="password"]') as HTMLInputElement).value;
    if (!user) return;
    const client = new MeetingClient(webSocketTransport(wsUrl()), { user, password });
    loginRoot.hidden = true;
    roomRoot.hidden = false;
    new MeetingRoom(roomRoot, client);
    client.connect();
  };
}

document.addEventListener("DOMContentLoaded", boot);
