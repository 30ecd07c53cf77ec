/** Node TCP transport for headless clients: the wire protocol verbatim. */

import * as net from "node:net";
import { Transport, TransportFactory } from "../src/client.js";

export function tcpTransport(host: string, port: number): TransportFactory {
  return (): Transport => {
    const socket = net.createConnection({ host, port });
    socket.setNoDelay(true);
    let buffer = "";
    let lineHandler: (line: string) => void = () => undefined;
    let closeHandler: () => void = () => undefined;
    let openHandler: () => void = () => undefined;
    socket.on("connect", () => openHandler());
    socket.on("close", () => closeHandler());
    socket.on("error", () => socket.destroy());
    socket.on("data", (chunk) => {
      buffer += chunk.toString("utf-8");
      let index;
      while ((index = buffer.indexOf("\n")) >= 0) {
        const line = buffer.slice(0, index);
        buffer = buffer.slice(index + 1);
        if (line.trim()) lineHandler(line);
      }
    });
    return {
      send: (line) => socket.write(line),
      close: () => socket.end(),
      onLine: (h) => (lineHandler = h),
      onClose: (h) => (closeHandler = h),
      onOpen: (h) => (openHandler = h),
    };
  };
}
