use crate::bench::LinkBudget;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// Server to client.
    Down,
    /// Client to server.
    Up,
}

/// Octet, frame and message counters per direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrafficCounters {
    pub bytes_down: u64,
    pub frames_down: u64,
    pub messages_down: u64,
    pub bytes_up: u64,
    pub frames_up: u64,
    pub messages_up: u64,
}

impl TrafficCounters {
    pub fn add(&mut self, other: &TrafficCounters) {
        self.bytes_down += other.bytes_down;
        self.frames_down += other.frames_down;
        self.messages_down += other.messages_down;
        self.bytes_up += other.bytes_up;
        self.frames_up += other.frames_up;
        self.messages_up += other.messages_up;
    }
}

/// Accounts one transmission of `payload` in `direction`.
pub fn transport_deliver(
    payload: &[u8],
    direction: Direction,
    counters: &mut TrafficCounters,
    link: &LinkBudget,
) {
    let bytes = payload.len() as u64;
    let frames = link.frames(payload.len()) as u64;
    match direction {
        Direction::Down => {
            counters.bytes_down += bytes;
            counters.frames_down += frames;
            counters.messages_down += 1;
        }
        Direction::Up => {
            counters.bytes_up += bytes;
            counters.frames_up += frames;
            counters.messages_up += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn examples() {
        let link = LinkBudget::default();
        let mut c = TrafficCounters::default();
        transport_deliver(&[0; 28], Direction::Up, &mut c, &link);
        assert_eq!((c.bytes_up, c.frames_up), (28, 1));
        transport_deliver(&vec![0; 2027], Direction::Down, &mut c, &link);
        assert_eq!((c.bytes_down, c.frames_down), (2027, 32));
        transport_deliver(&[], Direction::Down, &mut c, &link);
        assert_eq!(
            (c.bytes_down, c.frames_down, c.messages_down),
            (2027, 33, 2)
        );
    }
}
