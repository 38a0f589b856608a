import { parseArgs } from "node:util";

import { DashboardServer } from "./server.js";

const { values } = parseArgs({
  options: {
    runtime: { type: "string", default: "127.0.0.1:8571" },
    port: { type: "string", default: "8080" },
  },
});

const [host, portText] = (values.runtime as string).split(":");
const runtimePort = Number(portText);
if (!host || !Number.isInteger(runtimePort)) {
  console.error("usage: node dist/main.js --runtime HOST:PORT [--port N]");
  process.exit(1);
}

const server = new DashboardServer({
  runtimeHost: host,
  runtimePort,
  port: Number(values.port),
});

server
  .start()
  .then((port) => {
    console.log(`dashboard on http://127.0.0.1:${port} (runtime at ${host}:${runtimePort})`);
  })
  .catch((error) => {
    console.error(`failed to start: ${error}`);
    process.exit(1);
  });

process.on("SIGINT", () => {
  server.close();
  process.exit(0);
});
