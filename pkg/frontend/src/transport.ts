/**
 * Transport seam: the session layer sees only frames. The browser build
 * uses a WebSocket (one envelope per text frame); tests drive the same
 * session code over a TCP stream where frames are newline-delimited.
 */

export interface Transport {
  send(frame: string): void;
  onFrame(handler: (frame: string) => void): void;
  onClose(handler: () => void): void;
  close(): void;
}

export class WebSocketTransport implements Transport {
  private frameHandler: (frame: string) => void = () => {};
  private closeHandler: () => void = () => {};

  constructor(private socket: WebSocket) {
    socket.onmessage = (ev) => {
      const text = typeof ev.data === "string" ? ev.data : "";
      if (text.trim().length === 0) return; // keepalive
      this.frameHandler(text);
    };
    socket.onclose = () => this.closeHandler();
  }

  send(frame: string): void {
    this.socket.send(frame);
  }

  onFrame(handler: (frame: string) => void): void {
    this.frameHandler = handler;
  }

  onClose(handler: () => void): void {
    this.closeHandler = handler;
  }

  close(): void {
    this.socket.close();
  }
}

/** In-memory transport for unit tests: frames are delivered synchronously. */
export class LoopbackTransport implements Transport {
  sent: string[] = [];
  private frameHandler: (frame: string) => void = () => {};
  private closeHandler: () => void = () => {};
  closed = false;

  send(frame: string): void {
    this.sent.push(frame);
  }

  deliver(frame: string): void {
    if (frame.trim().length === 0) return;
    this.frameHandler(frame);
  }

  onFrame(handler: (frame: string) => void): void {
    this.frameHandler = handler;
  }

  onClose(handler: () => void): void {
    this.closeHandler = handler;
  }

  close(): void {
    this.closed = true;
    this.closeHandler();
  }
}
