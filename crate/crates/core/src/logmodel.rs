//! Access-log records in Apache Combined Log Format, plus the ground-truth
//! labeling rules shared by the generator and the environment.
//!
//! Line layout:
//!
//! ```text
//! IP - - [dd/Mon/yyyy:HH:MM:SS +0000] "GET URI HTTP/1.1" STATUS BYTES "REFERRER" "USER-AGENT"
//! ```
//!
//! Quoted fields escape `"` and `\` with a backslash. The request URI may
//! contain spaces (injection payloads often do); the method is the first token
//! of the request and the protocol the last.

use std::fmt::Write as _;
use std::net::Ipv4Addr;
use std::sync::LazyLock;

use chrono::{DateTime, Utc};
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TIME_FORMAT: &str = "%d/%b/%Y:%H:%M:%S %z";

static SUSPICIOUS_UA: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)curl|bot").expect("static regex"));

static INJECTION: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)'\s*or\s+1\s*=\s*1|<script|\.\./").expect("static regex")
});

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub ip: String,
    /// Seconds since the Unix epoch, UTC.
    pub timestamp: i64,
    pub method: String,
    pub uri: String,
    pub protocol: String,
    pub status: u16,
    pub bytes: u64,
    pub referrer: String,
    pub user_agent: String,
    /// Ground truth, when known. Never part of the log line itself.
    pub label: Option<bool>,
}

impl LogEntry {
    pub fn is_anomaly(&self) -> bool {
        self.label.unwrap_or_else(|| label_entry(self))
    }
}

/// True iff the user agent matches `curl|bot`, case-insensitively.
pub fn is_suspicious_ua(user_agent: &str) -> bool {
    SUSPICIOUS_UA.is_match(user_agent)
}

/// True iff the URI carries a recognized injection or traversal payload:
/// SQL tautologies, comment markers in the query string, script tags, or
/// `../` path traversal.
pub fn is_injection_uri(uri: &str) -> bool {
    if INJECTION.is_match(uri) {
        return true;
    }
    match uri.split_once('?') {
        Some((_, query)) => query.contains("--"),
        None => false,
    }
}

/// Ground-truth anomaly rule: injection URI or an unauthorized/forbidden
/// status. The user agent deliberately plays no part here.
pub fn label_entry(entry: &LogEntry) -> bool {
    label_fields(&entry.uri, entry.status)
}

pub fn label_fields(uri: &str, status: u16) -> bool {
    is_injection_uri(uri) || matches!(status, 401 | 403)
}

pub fn format_timestamp(epoch_secs: i64) -> String {
    DateTime::<Utc>::from_timestamp(epoch_secs, 0)
        .unwrap_or_default()
        .format(TIME_FORMAT)
        .to_string()
}

fn push_quoted(out: &mut String, field: &str) {
    out.push('"');
    for c in field.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
}

/// Render an entry as one Combined Log Format line (no trailing newline).
pub fn format_line(entry: &LogEntry) -> String {
    let mut out = String::with_capacity(160);
    let _ = write!(
        out,
        "{} - - [{}] ",
        entry.ip,
        format_timestamp(entry.timestamp)
    );
    let request = format!("{} {} {}", entry.method, entry.uri, entry.protocol);
    push_quoted(&mut out, &request);
    let _ = write!(out, " {} {} ", entry.status, entry.bytes);
    push_quoted(&mut out, &entry.referrer);
    out.push(' ');
    push_quoted(&mut out, &entry.user_agent);
    out
}

struct Cursor<'a> {
    line: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn rest(&self) -> &'a str {
        &self.line[self.pos..]
    }

    fn fail<T>(&self, reason: impl Into<String>) -> Result<T> {
        Err(Error::parse(self.pos, reason))
    }

    fn token(&mut self, what: &str) -> Result<&'a str> {
        let rest = self.rest();
        let end = rest.find(' ').unwrap_or(rest.len());
        if end == 0 {
            return self.fail(format!("expected {what}"));
        }
        self.pos += end;
        Ok(&rest[..end])
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.rest().starts_with(c) {
            self.pos += c.len_utf8();
            Ok(())
        } else {
            self.fail(format!("expected '{c}'"))
        }
    }

    fn bracketed(&mut self) -> Result<&'a str> {
        self.expect('[')?;
        let rest = self.rest();
        match rest.find(']') {
            Some(end) => {
                self.pos += end + 1;
                Ok(&rest[..end])
            }
            None => self.fail("unterminated '['"),
        }
    }

    fn quoted(&mut self) -> Result<String> {
        self.expect('"')?;
        let mut value = String::new();
        let mut chars = self.rest().char_indices();
        while let Some((i, c)) = chars.next() {
            match c {
                '\\' => match chars.next() {
                    Some((_, escaped)) => value.push(escaped),
                    None => {
                        self.pos += i;
                        return self.fail("dangling escape");
                    }
                },
                '"' => {
                    self.pos += i + 1;
                    return Ok(value);
                }
                _ => value.push(c),
            }
        }
        self.pos = self.line.len();
        self.fail("unterminated quoted field")
    }
}

/// Parse one Combined Log Format line. The label is left unset.
pub fn parse_line(line: &str) -> Result<LogEntry> {
    let line = line.strip_suffix('\n').unwrap_or(line);
    let line = line.strip_suffix('\r').unwrap_or(line);
    let mut cur = Cursor { line, pos: 0 };

    let ip_start = cur.pos;
    let ip = cur.token("client address")?;
    if ip.parse::<Ipv4Addr>().is_err() {
        return Err(Error::parse(ip_start, format!("invalid IPv4 address '{ip}'")));
    }
    cur.expect(' ')?;
    cur.token("identity")?;
    cur.expect(' ')?;
    cur.token("user")?;
    cur.expect(' ')?;

    let time_start = cur.pos;
    let time = cur.bracketed()?;
    let timestamp = DateTime::parse_from_str(time, TIME_FORMAT)
        .map_err(|e| Error::parse(time_start + 1, format!("bad timestamp '{time}': {e}")))?
        .timestamp();
    cur.expect(' ')?;

    let request_start = cur.pos;
    let request = cur.quoted()?;
    let (method, tail) = request
        .split_once(' ')
        .ok_or_else(|| Error::parse(request_start, "request line has no URI"))?;
    let (uri, protocol) = tail
        .rsplit_once(' ')
        .ok_or_else(|| Error::parse(request_start, "request line has no protocol"))?;
    if method.is_empty() || uri.is_empty() || protocol.is_empty() {
        return Err(Error::parse(request_start, "incomplete request line"));
    }
    cur.expect(' ')?;

    let status_start = cur.pos;
    let status_text = cur.token("status")?;
    let status = match status_text.parse::<u16>() {
        Ok(code) if status_text.len() == 3 => code,
        _ => {
            return Err(Error::parse(
                status_start,
                format!("status '{status_text}' is not a 3-digit code"),
            ))
        }
    };
    cur.expect(' ')?;

    let bytes_start = cur.pos;
    let bytes_text = cur.token("byte count")?;
    let bytes = if bytes_text == "-" {
        0
    } else {
        bytes_text
            .parse::<u64>()
            .map_err(|_| Error::parse(bytes_start, format!("bad byte count '{bytes_text}'")))?
    };
    cur.expect(' ')?;

    let referrer = cur.quoted()?;
    cur.expect(' ')?;
    let user_agent = cur.quoted()?;
    if !cur.rest().is_empty() {
        return cur.fail("trailing characters after user agent");
    }

    Ok(LogEntry {
        ip: ip.to_string(),
        timestamp,
        method: method.to_string(),
        uri: uri.to_string(),
        protocol: protocol.to_string(),
        status,
        bytes,
        referrer,
        user_agent,
        label: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"203.0.113.7 - - [01/Jan/2024:00:00:01 +0000] "GET /index.html HTTP/1.1" 200 1024 "-" "Mozilla/5.0""#;

    fn entry(uri: &str, status: u16, ua: &str) -> LogEntry {
        LogEntry {
            ip: "10.0.0.1".into(),
            timestamp: 1_704_067_200,
            method: "GET".into(),
            uri: uri.into(),
            protocol: "HTTP/1.1".into(),
            status,
            bytes: 512,
            referrer: "-".into(),
            user_agent: ua.into(),
            label: None,
        }
    }

    #[test]
    fn parses_sample_line() {
        let e = parse_line(SAMPLE).unwrap();
        assert_eq!(e.ip, "203.0.113.7");
        assert_eq!(e.status, 200);
        assert_eq!(e.bytes, 1024);
        assert_eq!(e.uri, "/index.html");
        assert_eq!(e.method, "GET");
        assert_eq!(e.referrer, "-");
        assert_eq!(e.user_agent, "Mozilla/5.0");
        assert_eq!(e.timestamp, 1_704_067_201);
        assert_eq!(e.label, None);
        assert_eq!(format_line(&e), SAMPLE);
    }

    #[test]
    fn injection_uri_with_spaces_parses_and_labels_anomalous() {
        let line = r#"198.51.100.4 - - [01/Jan/2024:00:00:01 +0000] "GET /admin?' OR 1=1 -- HTTP/1.1" 200 300 "-" "curl/7.68.0""#;
        let e = parse_line(line).unwrap();
        assert_eq!(e.uri, "/admin?' OR 1=1 --");
        assert!(label_entry(&e));
    }

    #[test]
    fn garbage_is_rejected() {
        assert!(matches!(parse_line("garbage"), Err(Error::Parse { .. })));
        assert!(parse_line("").is_err());
    }

    #[test]
    fn error_offsets_point_at_the_bad_field() {
        let bad_status = SAMPLE.replace("\" 200 ", "\" 20x ");
        match parse_line(&bad_status) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, SAMPLE.find("200").unwrap()),
            other => panic!("unexpected {other:?}"),
        }
        let unterminated = &SAMPLE[..SAMPLE.len() - 1];
        assert!(parse_line(unterminated).is_err());
        assert!(parse_line(&format!("{SAMPLE} extra")).is_err());
        assert!(parse_line(&SAMPLE.replace("203.0.113.7", "not-an-ip")).is_err());
    }

    #[test]
    fn any_three_digit_status_is_accepted() {
        let e = parse_line(&SAMPLE.replace("\" 200 ", "\" 418 ")).unwrap();
        assert_eq!(e.status, 418);
    }

    #[test]
    fn quotes_in_user_agent_round_trip() {
        let mut e = entry("/x", 200, r#"Evil "quoted" \agent\"#);
        e.referrer = r#"http://a.example/"q""#.into();
        let line = format_line(&e);
        assert!(line.contains(r#"\"quoted\""#));
        assert_eq!(parse_line(&line).unwrap(), e);
    }

    #[test]
    fn minimal_entry_formats_canonically() {
        let e = entry("/", 200, "-");
        assert_eq!(
            format_line(&e),
            r#"10.0.0.1 - - [01/Jan/2024:00:00:00 +0000] "GET / HTTP/1.1" 200 512 "-" "-""#
        );
    }

    #[test]
    fn suspicious_user_agents() {
        assert!(is_suspicious_ua("curl/7.68.0"));
        assert!(!is_suspicious_ua("Mozilla/5.0 (Windows NT 10.0)"));
        assert!(is_suspicious_ua("Googlebot/2.1"));
        assert!(is_suspicious_ua("CURL"));
    }

    #[test]
    fn labeling_rule() {
        assert!(label_entry(&entry("/admin?' OR 1=1 --", 200, "Mozilla/5.0")));
        assert!(!label_entry(&entry("/index.html", 200, "Mozilla/5.0")));
        assert!(label_entry(&entry("/index.html", 401, "Mozilla/5.0")));
        assert!(label_entry(&entry("/index.html", 403, "Mozilla/5.0")));
        assert!(!label_entry(&entry("/index.html", 500, "Mozilla/5.0")));
        // a suspicious agent alone does not make an anomaly
        assert!(!label_entry(&entry("/index.html", 200, "curl/7.68.0")));
        assert!(label_entry(&entry("/search?q=<SCRIPT>alert(1)</script>", 200, "-")));
        assert!(label_entry(&entry("/static/../../etc/passwd", 200, "-")));
        assert!(label_entry(&entry("/item?id=5--", 200, "-")));
        assert!(!label_entry(&entry("/docs/a--b.html", 200, "-")));
    }
}
