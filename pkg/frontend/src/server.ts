/**
 * Dashboard server: bridges the runtime's TCP frame protocol to the
 * browser. Static files plus two endpoints:
 *
 *   GET  /events   - server-sent events: snapshot / status / outcome
 *   POST /command  - forward one command, respond with the reply payload
 *
 * Browsers cannot open raw TCP sockets, so this process owns the single
 * runtime connection and fans snapshots out to any number of pages.
 */
import http from "node:http";
import { readFile } from "node:fs/promises";
import path from "node:path";
import { fileURLToPath } from "node:url";

import { RuntimeClient } from "./protocol.js";

const PUBLIC_DIR = path.join(path.dirname(fileURLToPath(import.meta.url)), "..", "public");

const STATIC_FILES: Record<string, { file: string; type: string }> = {
  "/": { file: "index.html", type: "text/html; charset=utf-8" },
  "/index.html": { file: "index.html", type: "text/html; charset=utf-8" },
  "/app.js": { file: "app.js", type: "text/javascript; charset=utf-8" },
};

export interface DashboardOptions {
  runtimeHost: string;
  runtimePort: number;
  port: number;
}

export class DashboardServer {
  readonly client: RuntimeClient;
  private server: http.Server;
  private sseClients = new Set<http.ServerResponse>();
  port = 0;

  constructor(private options: DashboardOptions) {
    this.client = new RuntimeClient({ host: options.runtimeHost, port: options.runtimePort });
    this.client.on("snapshot", (snapshot) => this.broadcast("snapshot", snapshot));
    this.client.on("status", (status) => this.broadcast("status", { status }));
    this.server = http.createServer((req, res) => {
      this.handle(req, res).catch((error) => {
        res.writeHead(500, { "Content-Type": "application/json" });
        res.end(JSON.stringify({ error: String(error) }));
      });
    });
  }

  start(): Promise<number> {
    this.client.connect();
    return new Promise((resolve, reject) => {
      this.server.once("error", reject);
      this.server.listen(this.options.port, "127.0.0.1", () => {
        const address = this.server.address();
        this.port = typeof address === "object" && address ? address.port : this.options.port;
        resolve(this.port);
      });
    });
  }

  private async handle(req: http.IncomingMessage, res: http.ServerResponse): Promise<void> {
    const url = new URL(req.url ?? "/", "http://localhost");
    if (req.method === "GET" && STATIC_FILES[url.pathname]) {
      const { file, type } = STATIC_FILES[url.pathname];
      const body = await readFile(path.join(PUBLIC_DIR, file));
      res.writeHead(200, { "Content-Type": type });
      res.end(body);
      return;
    }
    if (req.method === "GET" && url.pathname === "/events") {
      this.openEventStream(res);
      return;
    }
    if (req.method === "POST" && url.pathname === "/command") {
      const body = await readBody(req);
      let command: Record<string, unknown>;
      try {
        command = JSON.parse(body);
      } catch {
        res.writeHead(400, { "Content-Type": "application/json" });
        res.end(JSON.stringify({ error: "body must be JSON" }));
        return;
      }
      try {
        const reply = await this.client.sendCommand(command);
        res.writeHead(200, { "Content-Type": "application/json" });
        res.end(JSON.stringify({ type: reply.type, payload: reply.payload }));
      } catch (error) {
        res.writeHead(502, { "Content-Type": "application/json" });
        res.end(JSON.stringify({ error: String(error) }));
      }
      return;
    }
    res.writeHead(404, { "Content-Type": "application/json" });
    res.end(JSON.stringify({ error: "not found" }));
  }

  private openEventStream(res: http.ServerResponse): void {
    res.writeHead(200, {
      "Content-Type": "text/event-stream",
      "Cache-Control": "no-cache",
      Connection: "keep-alive",
    });
    this.sseClients.add(res);
    res.on("close", () => this.sseClients.delete(res));
    sendEvent(res, "status", { status: this.client.status });
    if (this.client.lastSnapshot) {
      sendEvent(res, "snapshot", this.client.lastSnapshot);
    }
  }

  private broadcast(event: string, data: unknown): void {
    for (const res of this.sseClients) {
      sendEvent(res, event, data);
    }
  }

  close(): void {
    this.client.close();
    for (const res of this.sseClients) res.end();
    this.sseClients.clear();
    this.server.close();
  }
}

function sendEvent(res: http.ServerResponse, event: string, data: unknown): void {
  res.write(`event: ${event}\ndata: ${JSON.stringify(data)}\n\n`);
}

function readBody(req: http.IncomingMessage): Promise<string> {
  return new Promise((resolve, reject) => {
    const chunks: Buffer[] = [];
    req.on("data", (chunk) => chunks.push(chunk));
    req.on("end", () => resolve(Buffer.concat(chunks).toString("utf8")));
    req.on("error", reject);
  });
}
