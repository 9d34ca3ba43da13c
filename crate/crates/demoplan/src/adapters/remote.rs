//! JSON-over-HTTP client for remote adapter sidecars.
//!
//! One POST per call, `Connection: close`, bounded retries on 5xx and
//! transport errors. Plain HTTP only: sidecars are expected to run next to
//! the harness; anything heavier belongs in the sidecar itself.

use std::io::{Read, Write};
use std::net::{SocketAddr, TcpStream, ToSocketAddrs};
use std::time::{Duration, Instant};

use serde_json::Value;

use super::{schema, Adapter, AdapterConfig, AdapterError, AdapterResponse, AdapterRole};

pub struct RemoteAdapter {
    role: AdapterRole,
    endpoint: Endpoint,
    timeout: Duration,
    retries: u32,
    token: Option<String>,
}

#[derive(Debug, Clone)]
struct Endpoint {
    host: String,
    port: u16,
    path: String,
}

fn parse_endpoint(url: &str) -> Result<Endpoint, AdapterError> {
    let rest = url
        .strip_prefix("http://")
        .ok_or_else(|| AdapterError::Config(format!("endpoint must be http://, got `{url}`")))?;
    let (authority, path) = match rest.find('/') {
        Some(i) => (&rest[..i], rest[i..].to_string()),
        None => (rest, "/".to_string()),
    };
    let (host, port) = match authority.rsplit_once(':') {
        Some((host, port)) => {
            let port = port
                .parse()
                .map_err(|_| AdapterError::Config(format!("invalid port in `{url}`")))?;
            (host.to_string(), port)
        }
        None => (authority.to_string(), 80),
    };
    if host.is_empty() {
        return Err(AdapterError::Config(format!("missing host in `{url}`")));
    }
    Ok(Endpoint { host, port, path })
}

impl RemoteAdapter {
    pub fn from_config(role: AdapterRole, config: &AdapterConfig) -> Result<Self, AdapterError> {
        config.validate()?;
        let env_key = format!("DEMOPLAN_{}_ENDPOINT", role.name().to_uppercase());
        let url = std::env::var(&env_key)
            .ok()
            .or_else(|| config.endpoint.clone())
            .ok_or_else(|| AdapterError::Config(format!("no endpoint for role `{}`", role.name())))?;
        Ok(Self {
            role,
            endpoint: parse_endpoint(&url)?,
            timeout: Duration::from_secs_f64(config.timeout_secs),
            retries: config.retries,
            token: std::env::var("DEMOPLAN_ADAPTER_TOKEN").ok(),
        })
    }

    fn resolve(&self) -> std::io::Result<SocketAddr> {
        (self.endpoint.host.as_str(), self.endpoint.port)
            .to_socket_addrs()?
            .next()
            .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::NotFound, "no address for host"))
    }

    fn post_once(&self, body: &str) -> std::io::Result<(u16, String)> {
        let addr = self.resolve()?;
        let mut stream = TcpStream::connect_timeout(&addr, self.timeout)?;
        stream.set_read_timeout(Some(self.timeout))?;
        stream.set_write_timeout(Some(self.timeout))?;

        let mut request = format!(
            "POST {} HTTP/1.1\r\nHost: {}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n",
            self.endpoint.path,
            self.endpoint.host,
            body.len(),
        );
        if let Some(token) = &self.token {
            request.push_str(&format!("Authorization: Bearer {token}\r\n"));
        }
        request.push_str("\r\n");
        stream.write_all(request.as_bytes())?;
        stream.write_all(body.as_bytes())?;

        let mut raw = Vec::new();
        stream.read_to_end(&mut raw)?;
        let text = String::from_utf8_lossy(&raw).into_owned();

        let status = text
            .lines()
            .next()
            .and_then(|line| line.split_whitespace().nth(1))
            .and_then(|code| code.parse::<u16>().ok())
            .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidData, "malformed status line"))?;

        let header_end = text
            .find("\r\n\r\n")
            .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidData, "missing header terminator"))?;
        let headers = &text[..header_end];
        let mut payload = text[header_end + 4..].to_string();
        let content_length = headers.lines().find_map(|line| {
            let (name, value) = line.split_once(':')?;
            name.trim().eq_ignore_ascii_case("content-length").then(|| value.trim().parse::<usize>().ok())?
        });
        if let Some(n) = content_length {
            payload.truncate(n);
        }
        Ok((status, payload))
    }
}

impl Adapter for RemoteAdapter {
    fn role(&self) -> AdapterRole {
        self.role
    }

    fn call(&self, payload: &Value) -> Result<AdapterResponse, AdapterError> {
        schema::validate_request(self.role, payload)?;
        let body = payload.to_string();
        let started = Instant::now();
        let mut last_status: Option<u16> = None;
        let mut last_io: Option<std::io::Error> = None;

        for attempt in 1..=self.retries + 1 {
            match self.post_once(&body) {
                Ok((status, text)) if (200..300).contains(&status) => {
                    let parsed: Value =
                        serde_json::from_str(&text).map_err(|e| AdapterError::SchemaViolation {
                            role: self.role.name().to_string(),
                            detail: format!("response is not JSON: {e}"),
                            raw: text.clone(),
                        })?;
                    schema::validate_response(self.role, &parsed)?;
                    return Ok(AdapterResponse {
                        payload: parsed,
                        latency: started.elapsed().as_secs_f64(),
                        attempt_count: attempt,
                    });
                }
                Ok((status, _)) if (500..600).contains(&status) => {
                    last_status = Some(status);
                }
                Ok((status, _)) => {
                    return Err(AdapterError::Remote { role: self.role.name().to_string(), status });
                }
                Err(e) => {
                    last_io = Some(e);
                }
            }
        }

        match (last_status, last_io) {
            (Some(status), _) => Err(AdapterError::Remote { role: self.role.name().to_string(), status }),
            (None, Some(e)) => Err(AdapterError::Unavailable {
                role: self.role.name().to_string(),
                reason: format!("transport error after {} attempts: {e}", self.retries + 1),
            }),
            (None, None) => unreachable!("at least one attempt ran"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoint_parsing_handles_ports_and_paths() {
        let e = parse_endpoint("http://127.0.0.1:8045/planner").unwrap();
        assert_eq!((e.host.as_str(), e.port, e.path.as_str()), ("127.0.0.1", 8045, "/planner"));
        let e = parse_endpoint("http://models.internal/generate").unwrap();
        assert_eq!((e.host.as_str(), e.port, e.path.as_str()), ("models.internal", 80, "/generate"));
        assert!(parse_endpoint("https://secure.example/x").is_err());
        assert!(parse_endpoint("http://:80/x").is_err());
    }
}
