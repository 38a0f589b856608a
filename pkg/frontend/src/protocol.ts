/**
 * Wire protocol for the runtime's snapshot/command connection.
 *
 * Frames are UTF-8 JSON objects `{type, payload}` preceded by a 4-byte
 * big-endian length. The runtime pushes `hello`, `snapshot`, `outcome`,
 * `ack` and `error` frames; we send `command` frames whose payload
 * carries an `id` echoed by the matching reply.
 */
import { EventEmitter } from "node:events";
import net from "node:net";

export interface Frame {
  type: string;
  payload: Record<string, unknown>;
}

export type ConnectionStatus = "connecting" | "connected" | "reconnecting" | "closed";

export function encodeFrame(type: string, payload: unknown): Buffer {
  const body = Buffer.from(JSON.stringify({ type, payload }), "utf8");
  const frame = Buffer.alloc(4 + body.length);
  frame.writeUInt32BE(body.length, 0);
  body.copy(frame, 4);
  return frame;
}

export class FrameDecoder {
  private buffer: Buffer = Buffer.alloc(0);

  push(chunk: Buffer): Frame[] {
    this.buffer = Buffer.concat([this.buffer, chunk]);
    const frames: Frame[] = [];
    for (;;) {
      if (this.buffer.length < 4) return frames;
      const length = this.buffer.readUInt32BE(0);
      if (this.buffer.length < 4 + length) return frames;
      const body = this.buffer.subarray(4, 4 + length).toString("utf8");
      this.buffer = this.buffer.subarray(4 + length);
      frames.push(JSON.parse(body) as Frame);
    }
  }
}

export interface RuntimeClientOptions {
  host: string;
  port: number;
  /** initial reconnect delay; doubles up to 4s */
  backoffMs?: number;
  commandTimeoutMs?: number;
}

interface PendingCommand {
  resolve: (frame: Frame) => void;
  reject: (error: Error) => void;
  timer: NodeJS.Timeout;
}

/**
 * One duplex connection to the runtime with automatic reconnect.
 *
 * Events: `status` (ConnectionStatus), `snapshot`, `hello`, `frame`.
 */
export class RuntimeClient extends EventEmitter {
  private socket: net.Socket | null = null;
  private decoder = new FrameDecoder();
  private pending = new Map<number, PendingCommand>();
  private nextId = 1;
  private closed = false;
  private backoff: number;
  private readonly options: Required<RuntimeClientOptions>;
  status: ConnectionStatus = "connecting";
  lastSnapshot: Record<string, unknown> | null = null;

  constructor(options: RuntimeClientOptions) {
    super();
    this.options = {
      backoffMs: 250,
      commandTimeoutMs: 5000,
      ...options,
    };
    this.backoff = this.options.backoffMs;
  }

  connect(): void {
    if (this.closed) return;
    const socket = net.createConnection(this.options.port, this.options.host);
    this.socket = socket;
    this.decoder = new FrameDecoder();
    socket.on("connect", () => {
      this.backoff = this.options.backoffMs;
      this.setStatus("connected");
    });
    socket.on("data", (chunk) => {
      for (const frame of this.decoder.push(chunk)) this.dispatch(frame);
    });
    socket.on("error", () => {
      /* close follows; reconnect handles it */
    });
    socket.on("close", () => {
      this.socket = null;
      this.failPending(new Error("connection lost"));
      if (this.closed) return;
      this.setStatus("reconnecting");
      const delay = this.backoff;
      this.backoff = Math.min(this.backoff * 2, 4000);
      setTimeout(() => this.connect(), delay).unref?.();
    });
  }

  private dispatch(frame: Frame): void {
    this.emit("frame", frame);
    if (frame.type === "snapshot") {
      this.lastSnapshot = frame.payload;
      this.emit("snapshot", frame.payload);
    } else if (frame.type === "hello") {
      this.emit("hello", frame.payload);
    }
    const id = frame.payload?.id;
    if (typeof id === "number" && this.pending.has(id)) {
      const pending = this.pending.get(id)!;
      this.pending.delete(id);
      clearTimeout(pending.timer);
      pending.resolve(frame);
    }
  }

  /** Send a command; resolves with the matching reply frame. */
  sendCommand(payload: Record<string, unknown>): Promise<Frame> {
    return new Promise((resolve, reject) => {
      if (!this.socket || this.status !== "connected") {
        reject(new Error("not connected"));
        return;
      }
      const id = this.nextId++;
      const timer = setTimeout(() => {
        this.pending.delete(id);
        reject(new Error("command timed out"));
      }, this.options.commandTimeoutMs);
      timer.unref?.();
      this.pending.set(id, { resolve, reject, timer });
      this.socket.write(encodeFrame("command", { ...payload, id }));
    });
  }

  private failPending(error: Error): void {
    for (const [, pending] of this.pending) {
      clearTimeout(pending.timer);
      pending.reject(error);
    }
    this.pending.clear();
  }

  private setStatus(status: ConnectionStatus): void {
    if (this.status !== status) {
      this.status = status;
      this.emit("status", status);
    }
  }

  close(): void {
    this.closed = true;
    this.failPending(new Error("client closed"));
    this.socket?.destroy();
    this.socket = null;
    this.setStatus("closed");
  }
}
