"use strict";
/**
 * Browser side of the dashboard. Receives snapshots over SSE, posts
 * commands over HTTP, renders everything from the latest snapshot -
 * no robot state is ever computed here.
 */
const el = {
    banner: document.getElementById("banner"),
    tick: document.getElementById("tick"),
    editor: document.getElementById("editor"),
    submit: document.getElementById("submit"),
    revert: document.getElementById("revert"),
    marker: document.getElementById("error-marker"),
    outcome: document.getElementById("outcome"),
    states: document.getElementById("states"),
    variables: document.getElementById("variables"),
    diagnostics: document.getElementById("diagnostics"),
    nodes: document.getElementById("nodes"),
    canvas: document.getElementById("world"),
    pauseButton: document.getElementById("pause"),
    resetButton: document.getElementById("reset"),
};
let latest = null;
let editorDirty = false;
function connect() {
    const source = new EventSource("/events");
    source.addEventListener("snapshot", (event) => {
        latest = JSON.parse(event.data);
        render();
    });
    source.addEventListener("status", (event) => {
        const { status } = JSON.parse(event.data);
        showBanner(status === "connected" ? null : `runtime ${status}...`);
    });
    source.onerror = () => {
        showBanner("dashboard connection lost, retrying...");
        // EventSource reconnects on its own
    };
}
function showBanner(text) {
    el.banner.textContent = text ?? "";
    el.banner.style.display = text ? "block" : "none";
}
async function post(command) {
    const response = await fetch("/command", {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(command),
    });
    if (!response.ok)
        throw new Error(`command failed: ${response.status}`);
    return response.json();
}
async function submitSource() {
    try {
        const reply = await post({ cmd: "load_source", text: el.editor.value });
        const outcome = reply.payload;
        if (outcome.kind === "rejected_parse_error") {
            const diag = outcome.diagnostics?.[0] ?? {};
            setMarker(diag.line ?? null, diag.col ?? null, diag.message ?? "parse error");
        }
        else {
            setMarker(null, null, null);
            editorDirty = false;
        }
        el.outcome.textContent = describeOutcome(outcome);
    }
    catch (error) {
        el.outcome.textContent = String(error);
    }
}
function describeOutcome(outcome) {
    const parts = [`outcome: ${outcome.kind}`];
    if (outcome.preserved?.length)
        parts.push(`kept ${outcome.preserved.join(", ")}`);
    if (outcome.respawned?.length)
        parts.push(`respawned ${outcome.respawned.join(", ")}`);
    if (outcome.idled?.length)
        parts.push(`idled ${outcome.idled.join(", ")}`);
    return parts.join(" | ");
}
function setMarker(line, col, message) {
    if (message === null) {
        el.marker.style.display = "none";
        el.marker.textContent = "";
        return;
    }
    el.marker.style.display = "block";
    el.marker.textContent = line !== null ? `line ${line}, col ${col}: ${message}` : message;
    if (line !== null) {
        const lines = el.editor.value.split("\n");
        let offset = 0;
        for (let i = 0; i < Math.min(line - 1, lines.length); i += 1)
            offset += lines[i].length + 1;
        el.editor.focus();
        el.editor.setSelectionRange(offset + ((col ?? 1) - 1), offset + (col ?? 1));
    }
}
function render() {
    if (!latest)
        return;
    el.tick.textContent = `tick ${latest.tick}${latest.paused ? " (paused)" : ""} [${latest.mode}]`;
    if (!editorDirty)
        el.editor.value = latest.source;
    el.states.replaceChildren(...latest.active.map((entry) => {
        const item = document.createElement("li");
        item.textContent = `${entry.machine}: `;
        const state = document.createElement("span");
        state.className = "active-state";
        state.textContent = entry.state;
        item.appendChild(state);
        return item;
    }));
    const outer = latest.active[latest.active.length - 1];
    const rows = Object.entries(outer?.variables ?? {}).map(([name, value]) => {
        const row = document.createElement("tr");
        const key = document.createElement("td");
        key.textContent = name;
        const val = document.createElement("td");
        val.textContent = String(value);
        row.append(key, val);
        return row;
    });
    el.variables.replaceChildren(...rows);
    el.diagnostics.replaceChildren(...latest.diagnostics.slice(-8).reverse().map((diag) => {
        const item = document.createElement("li");
        item.textContent = `[${diag.source ?? "?"}] ${diag.message ?? ""}`;
        return item;
    }));
    el.nodes.replaceChildren(...latest.nodes.map((node) => {
        const item = document.createElement("li");
        item.textContent =
            `${node.name} (${node.lifecycle})` +
                (node.subscribes.length ? ` sub ${node.subscribes.join(",")}` : "") +
                (node.publishes.length ? ` pub ${node.publishes.join(",")}` : "");
        return item;
    }));
    drawWorld();
}
function drawWorld() {
    if (!latest)
        return;
    const ctx = el.canvas.getContext("2d");
    if (!ctx)
        return;
    const { width, height } = el.canvas;
    ctx.clearRect(0, 0, width, height);
    const pose = latest.pose;
    const scale = 60; // pixels per meter
    const cx = width / 2 - pose.x * scale;
    const cy = height / 2 + pose.y * scale;
    const toX = (x) => cx + x * scale;
    const toY = (y) => cy - y * scale;
    // laser beams, faint
    if (latest.scan) {
        ctx.strokeStyle = "rgba(120, 170, 255, 0.25)";
        ctx.lineWidth = 1;
        const { angle_min, angle_increment, ranges } = latest.scan;
        ctx.beginPath();
        ranges.forEach((range, index) => {
            const angle = pose.theta + angle_min + index * angle_increment;
            ctx.moveTo(toX(pose.x), toY(pose.y));
            ctx.lineTo(toX(pose.x + range * Math.cos(angle)), toY(pose.y + range * Math.sin(angle)));
        });
        ctx.stroke();
    }
    // obstacle segments
    ctx.strokeStyle = "#333";
    ctx.lineWidth = 3;
    ctx.beginPath();
    for (const [x1, y1, x2, y2] of latest.world.segments) {
        ctx.moveTo(toX(x1), toY(y1));
        ctx.lineTo(toX(x2), toY(y2));
    }
    ctx.stroke();
    // robot disc with heading tick
    ctx.fillStyle = pose.collided ? "#c0392b" : "#2c7a4b";
    ctx.beginPath();
    ctx.arc(toX(pose.x), toY(pose.y), 0.25 * scale, 0, 2 * Math.PI);
    ctx.fill();
    ctx.strokeStyle = "#fff";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(toX(pose.x), toY(pose.y));
    ctx.lineTo(toX(pose.x + 0.25 * Math.cos(pose.theta)), toY(pose.y + 0.25 * Math.sin(pose.theta)));
    ctx.stroke();
}
el.editor.addEventListener("input", () => {
    editorDirty = latest !== null && el.editor.value !== latest.source;
});
el.submit.addEventListener("click", () => void submitSource());
el.revert.addEventListener("click", () => {
    editorDirty = false;
    setMarker(null, null, null);
    render();
});
el.pauseButton.addEventListener("click", () => {
    const paused = latest?.paused ?? false;
    void post({ cmd: paused ? "resume" : "pause" });
});
el.resetButton.addEventListener("click", () => void post({ cmd: "reset_world" }));
connect();
