//! Local stream endpoints: TCP addresses or Unix socket paths, behind one
//! listener/stream abstraction so every component can serve either.

use std::fmt;
use std::io::{self, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
#[cfg(unix)]
use std::os::unix::net::{UnixListener, UnixStream};
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Duration;

/// `host:port` parses as TCP; anything else is a filesystem socket path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    Tcp(SocketAddr),
    Unix(PathBuf),
}

impl FromStr for Endpoint {
    type Err = io::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Ok(addr) = s.parse::<SocketAddr>() {
            return Ok(Endpoint::Tcp(addr));
        }
        if s.is_empty() {
            return Err(io::Error::new(
                io::ErrorKind::InvalidInput,
                "empty endpoint",
            ));
        }
        Ok(Endpoint::Unix(PathBuf::from(s)))
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Tcp(addr) => write!(f, "{addr}"),
            Endpoint::Unix(path) => write!(f, "{}", path.display()),
        }
    }
}

pub enum Listener {
    Tcp(TcpListener),
    #[cfg(unix)]
    Unix(UnixListener),
}

impl Listener {
    /// The endpoint actually bound; resolves an ephemeral TCP port.
    pub fn local_endpoint(&self) -> io::Result<Endpoint> {
        match self {
            Listener::Tcp(l) => Ok(Endpoint::Tcp(l.local_addr()?)),
            #[cfg(unix)]
            Listener::Unix(l) => {
                let addr = l.local_addr()?;
                let path = addr
                    .as_pathname()
                    .ok_or_else(|| io::Error::other("unnamed unix socket"))?;
                Ok(Endpoint::Unix(path.to_path_buf()))
            }
        }
    }

    pub fn accept(&self) -> io::Result<IoStream> {
        match self {
            Listener::Tcp(l) => {
                let (stream, _) = l.accept()?;
                stream.set_nodelay(true).ok();
                Ok(IoStream::Tcp(stream))
            }
            #[cfg(unix)]
            Listener::Unix(l) => {
                let (stream, _) = l.accept()?;
                Ok(IoStream::Unix(stream))
            }
        }
    }
}

pub fn bind(endpoint: &Endpoint) -> io::Result<Listener> {
    match endpoint {
        Endpoint::Tcp(addr) => Ok(Listener::Tcp(TcpListener::bind(addr)?)),
        #[cfg(unix)]
        Endpoint::Unix(path) => {
            // A stale socket file from a previous run blocks binding.
            let _ = std::fs::remove_file(path);
            Ok(Listener::Unix(UnixListener::bind(path)?))
        }
        #[cfg(not(unix))]
        Endpoint::Unix(_) => Err(io::Error::new(
            io::ErrorKind::Unsupported,
            "unix sockets unavailable",
        )),
    }
}

pub fn connect(endpoint: &Endpoint) -> io::Result<IoStream> {
    match endpoint {
        Endpoint::Tcp(addr) => {
            let stream = TcpStream::connect(addr)?;
            stream.set_nodelay(true).ok();
            Ok(IoStream::Tcp(stream))
        }
        #[cfg(unix)]
        Endpoint::Unix(path) => Ok(IoStream::Unix(UnixStream::connect(path)?)),
        #[cfg(not(unix))]
        Endpoint::Unix(_) => Err(io::Error::new(
            io::ErrorKind::Unsupported,
            "unix sockets unavailable",
        )),
    }
}

pub enum IoStream {
    Tcp(TcpStream),
    #[cfg(unix)]
    Unix(UnixStream),
}

impl IoStream {
    pub fn try_clone(&self) -> io::Result<IoStream> {
        match self {
            IoStream::Tcp(s) => Ok(IoStream::Tcp(s.try_clone()?)),
            #[cfg(unix)]
            IoStream::Unix(s) => Ok(IoStream::Unix(s.try_clone()?)),
        }
    }

    pub fn shutdown(&self) {
        match self {
            IoStream::Tcp(s) => {
                let _ = s.shutdown(std::net::Shutdown::Both);
            }
            #[cfg(unix)]
            IoStream::Unix(s) => {
                let _ = s.shutdown(std::net::Shutdown::Both);
            }
        }
    }

    pub fn set_read_timeout(&self, timeout: Option<Duration>) -> io::Result<()> {
        match self {
            IoStream::Tcp(s) => s.set_read_timeout(timeout),
            #[cfg(unix)]
            IoStream::Unix(s) => s.set_read_timeout(timeout),
        }
    }
}

impl Read for IoStream {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        match self {
            IoStream::Tcp(s) => s.read(buf),
            #[cfg(unix)]
            IoStream::Unix(s) => s.read(buf),
        }
    }
}

impl Write for IoStream {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        match self {
            IoStream::Tcp(s) => s.write(buf),
            #[cfg(unix)]
            IoStream::Unix(s) => s.write(buf),
        }
    }

    fn flush(&mut self) -> io::Result<()> {
        match self {
            IoStream::Tcp(s) => s.flush(),
            #[cfg(unix)]
            IoStream::Unix(s) => s.flush(),
        }
    }
}

/// `127.0.0.1:0` — bind an ephemeral loopback port.
pub fn ephemeral_loopback() -> Endpoint {
    Endpoint::Tcp("127.0.0.1:0".parse().expect("fixed literal"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoint_parsing() {
        assert!(matches!(
            "127.0.0.1:7701".parse::<Endpoint>().unwrap(),
            Endpoint::Tcp(_)
        ));
        assert!(matches!(
            "/tmp/recorder.sock".parse::<Endpoint>().unwrap(),
            Endpoint::Unix(_)
        ));
        assert!("".parse::<Endpoint>().is_err());
    }

    #[test]
    fn tcp_round_trip() {
        let listener = bind(&ephemeral_loopback()).unwrap();
        let endpoint = listener.local_endpoint().unwrap();
        let server = std::thread::spawn(move || {
            let mut conn = listener.accept().unwrap();
            let mut buf = [0u8; 5];
            conn.read_exact(&mut buf).unwrap();
            conn.write_all(&buf).unwrap();
        });
        let mut client = connect(&endpoint).unwrap();
        client.write_all(b"hello").unwrap();
        let mut buf = [0u8; 5];
        client.read_exact(&mut buf).unwrap();
        assert_eq!(&buf, b"hello");
        server.join().unwrap();
    }

    #[cfg(unix)]
    #[test]
    fn unix_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let endpoint = Endpoint::Unix(dir.path().join("test.sock"));
        let listener = bind(&endpoint).unwrap();
        let server = std::thread::spawn(move || {
            let mut conn = listener.accept().unwrap();
            let mut buf = [0u8; 2];
            conn.read_exact(&mut buf).unwrap();
            conn.write_all(&buf).unwrap();
        });
        let mut client = connect(&endpoint).unwrap();
        client.write_all(b"ok").unwrap();
        let mut buf = [0u8; 2];
        client.read_exact(&mut buf).unwrap();
        server.join().unwrap();
    }
}
