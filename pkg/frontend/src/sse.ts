/** Minimal fetch-based server-sent-events consumer.
 *
 * The browser EventSource API cannot attach to arbitrary fetch options and
 * is unavailable in tests, so this parses the text/event-stream framing
 * directly from a streamed fetch body.
 */

export interface StreamEvent {
  type: string;
  data: Record<string, unknown>;
}

function parseBlock(block: string): StreamEvent | null {
  let type = "message";
  const dataLines: string[] = [];
  for (const line of block.split("\n")) {
    if (line.startsWith("event:")) type = line.slice(6).trim();
    else if (line.startsWith("data:")) dataLines.push(line.slice(5).trim());
  }
  if (dataLines.length === 0) return null;
  return { type, data: JSON.parse(dataLines.join("\n")) };
}

/**
 * Consume an SSE endpoint until the stream closes, invoking `onEvent` per
 * event. Resolves with the final (terminal) event.
 */
export async function consumeEventStream(
  url: string,
  onEvent: (event: StreamEvent) => void,
  fetchImpl: typeof fetch = fetch,
): Promise<StreamEvent> {
  const response = await fetchImpl(url, {
    headers: { accept: "text/event-stream" },
  });
  if (!response.ok || response.body === null) {
    throw new Error(`stream request failed: ${response.status}`);
  }
  const reader = response.body.getReader();
  const decoder = new TextDecoder();
  let buffer = "";
  let last: StreamEvent | null = null;
  for (;;) {
    const { done, value } = await reader.read();
    if (done) break;
    buffer += decoder.decode(value, { stream: true });
    let boundary: number;
    while ((boundary = buffer.indexOf("\n\n")) >= 0) {
      const event = parseBlock(buffer.slice(0, boundary));
      buffer = buffer.slice(boundary + 2);
      if (event !== null) {
        last = event;
        onEvent(event);
      }
    }
  }
  if (last === null) throw new Error("stream ended without events");
  return last;
}
