//! WebSocket front end of the live bridge. One thread accepts connections,
//! one thread per client moves frames; the simulation runs on the calling
//! thread and only touches the mailbox and the state hub.

use std::io::ErrorKind;
use std::net::{TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use telewalk::bridge::{
    run_live, Body, ErrorPayload, Hello, Inbox, Mailbox, ModelSummary, Outbox, ProtocolError, Role, StateHub,
    PROTOCOL_VERSION,
};
use telewalk::config::ScenarioConfig;
use telewalk::sim::RunSummary;
use tungstenite::{Message, WebSocket};

use crate::Failure;

const POLL: Duration = Duration::from_millis(5);

struct Shared {
    mailbox: Arc<Mailbox>,
    hub: StateHub,
    operator_taken: AtomicBool,
    stop: AtomicBool,
    model: ModelSummary,
    verbose: u8,
}

pub fn serve(cfg: &ScenarioConfig, out: Option<PathBuf>, verbose: u8) -> Result<RunSummary, Failure> {
    let model = cfg.load_model()?;
    cfg.check(&model)?;
    let listener = TcpListener::bind(("127.0.0.1", cfg.bridge.port)).map_err(|e| Failure::Io(format!("bind: {e}")))?;
    let addr = listener.local_addr().map_err(|e| Failure::Io(e.to_string()))?;
    listener.set_nonblocking(true).map_err(|e| Failure::Io(e.to_string()))?;
    eprintln!("listening on ws://{addr}");

    let shared = Arc::new(Shared {
        mailbox: Arc::new(Mailbox::default()),
        hub: StateHub::new(cfg.bridge.state_queue),
        operator_taken: AtomicBool::new(false),
        stop: AtomicBool::new(false),
        model: ModelSummary::new(&model, cfg.sim.dt),
        verbose,
    });
    let acceptor = {
        let shared = shared.clone();
        thread::spawn(move || accept_loop(listener, shared))
    };

    let writer = match &out {
        Some(p) => Some(std::io::BufWriter::new(
            std::fs::File::create(p).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))?,
        )),
        None => None,
    };
    let result = run_live(cfg, model, shared.mailbox.clone(), &shared.hub, &shared.stop, writer);
    shared.stop.store(true, Ordering::Relaxed);
    let _ = acceptor.join();
    Ok(result?)
}

fn accept_loop(listener: TcpListener, shared: Arc<Shared>) {
    let mut clients = Vec::new();
    while !shared.stop.load(Ordering::Relaxed) {
        match listener.accept() {
            Ok((stream, peer)) => {
                if shared.verbose > 0 {
                    eprintln!("client {peer} connected");
                }
                let shared = shared.clone();
                clients.push(thread::spawn(move || {
                    if let Err(e) = client(stream, &shared) {
                        if shared.verbose > 0 {
                            eprintln!("client {peer}: {e}");
                        }
                    }
                }));
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(POLL),
            Err(e) => {
                eprintln!("accept: {e}");
                thread::sleep(POLL);
            }
        }
    }
    for c in clients {
        let _ = c.join();
    }
}

fn send(ws: &mut WebSocket<TcpStream>, outbox: &mut Outbox, body: Body) -> Result<(), tungstenite::Error> {
    match ws.send(Message::Text(outbox.frame(body).to_json())) {
        // Frame stays queued inside the socket wrapper and goes out on a later flush.
        Err(tungstenite::Error::Io(e)) if is_timeout(&e) => Ok(()),
        other => other,
    }
}

fn is_timeout(e: &std::io::Error) -> bool {
    matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut)
}

fn send_error(ws: &mut WebSocket<TcpStream>, outbox: &mut Outbox, e: &ProtocolError) -> Result<(), tungstenite::Error> {
    send(ws, outbox, Body::Error(ErrorPayload::from(e)))
}

fn client(stream: TcpStream, shared: &Shared) -> Result<(), tungstenite::Error> {
    stream.set_nonblocking(false)?;
    stream.set_nodelay(true)?;
    let mut ws = tungstenite::accept(stream).map_err(|e| match e {
        tungstenite::HandshakeError::Failure(e) => e,
        tungstenite::HandshakeError::Interrupted(_) => tungstenite::Error::ConnectionClosed,
    })?;
    ws.get_ref().set_read_timeout(Some(POLL))?;
    ws.get_ref().set_write_timeout(Some(Duration::from_millis(50)))?;

    let mut outbox = Outbox::default();
    let mut inbox = Inbox::default();
    let queue = shared.hub.subscribe();
    let mut operator = false;
    send(
        &mut ws,
        &mut outbox,
        Body::Hello(Hello { protocol: PROTOCOL_VERSION, role: Role::Server, model: Some(shared.model.clone()) }),
    )?;

    let result = (|| -> Result<(), tungstenite::Error> {
        loop {
            if shared.stop.load(Ordering::Relaxed) {
                let _ = ws.close(None);
                let _ = ws.flush();
                return Ok(());
            }
            match ws.read() {
                Ok(Message::Text(text)) => match inbox.accept(&text) {
                    Ok(msg) => match msg.body {
                        Body::Hello(h) if h.role == Role::Operator => {
                            if shared.operator_taken.compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire).is_ok() {
                                operator = true;
                                shared.mailbox.set_connected(true);
                            } else {
                                let e = ProtocolError::Command("operator slot taken; session is read-only".into());
                                send_error(&mut ws, &mut outbox, &e)?;
                            }
                        }
                        Body::Hello(_) | Body::Error(_) => {}
                        Body::Command(c) if operator => shared.mailbox.put(c),
                        Body::Command(_) => {
                            send_error(&mut ws, &mut outbox, &ProtocolError::Command("session is read-only".into()))?;
                        }
                        Body::State(_) => {
                            send_error(&mut ws, &mut outbox, &ProtocolError::Malformed("clients do not send state".into()))?;
                        }
                    },
                    Err(e) => {
                        send_error(&mut ws, &mut outbox, &e)?;
                        if e.is_fatal() {
                            let _ = ws.close(None);
                            let _ = ws.flush();
                            return Ok(());
                        }
                    }
                },
                Ok(Message::Binary(_)) => {
                    send_error(&mut ws, &mut outbox, &ProtocolError::Malformed("binary frames are not supported".into()))?;
                }
                Ok(Message::Close(_)) => return Ok(()),
                Ok(_) => {}
                Err(tungstenite::Error::Io(e)) if is_timeout(&e) => {}
                Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => return Ok(()),
                Err(e) => return Err(e),
            }
            if inbox.hello().is_some() {
                while let Some(s) = queue.pop() {
                    send(&mut ws, &mut outbox, Body::State(Box::new(s)))?;
                }
            }
        }
    })();

    shared.hub.unsubscribe(&queue);
    if operator {
        shared.mailbox.set_connected(false);
        shared.operator_taken.store(false, Ordering::Release);
    }
    result
}
