/**
 * Transport seam: the session layer sees only frames. The browser build
 * uses a WebSocket (one envelope per text frame); tests drive the same
 * session code over a TCP stream where frames are newline-delimited.
 */
export class WebSocketTransport {
    socket;
    frameHandler = () => { };
    closeHandler = () => { };
    constructor(socket) {
        this.socket = socket;
        socket.onmessage = (ev) => {
            const text = typeof ev.data === "string" ? ev.data : "";
            if (text.trim().length === 0)
                return; // keepalive
            this.frameHandler(text);
        };
        socket.onclose = () => this.closeHandler();
    }
    send(frame) {
        this.socket.send(frame);
    }
    onFrame(handler) {
        this.frameHandler = handler;
    }
    onClose(handler) {
        this.closeHandler = handler;
    }
    close() {
        this.socket.close();
    }
}
/** In-memory transport for unit tests: frames are delivered synchronously. */
export class LoopbackTransport {
    sent = [];
    frameHandler = () => { };
    closeHandler = () => { };
    closed = false;
    send(frame) {
        this.sent.push(frame);
    }
    deliver(frame) {
        if (frame.trim().length === 0)
            return;
        this.frameHandler(frame);
    }
    onFrame(handler) {
        this.frameHandler = handler;
    }
    onClose(handler) {
        this.closeHandler = handler;
    }
    close() {
        this.closed = true;
        this.closeHandler();
    }
}
