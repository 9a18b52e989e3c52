#![allow(dead_code)]

use productmix::{Bid, BidList};

pub fn alice() -> BidList {
    BidList::new("Alice", vec![Bid::positive(&[6, 6]), Bid::positive(&[0, 4])])
}

pub fn bob() -> BidList {
    BidList::new(
        "Bob",
        vec![
            Bid::positive(&[2, 4]),
            Bid::positive(&[4, 2]),
            Bid::negative(&[4, 4]),
            Bid::positive(&[6, 6]),
        ],
    )
}

pub fn aggregate(lists: &[BidList]) -> Vec<Bid> {
    lists.iter().flat_map(|l| l.bids.iter().cloned()).collect()
}
