use sths_core::dataset::ZslDataset;

fn peek(ds: &ZslDataset) -> usize {
    ds.hidden.unseen.len()
}

fn main() {}
