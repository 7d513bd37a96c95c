#![no_main]

use amplify::scenario::parse_scenario;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(s) = parse_scenario(text) {
        // Anything accepted must survive a round trip unchanged.
        let back = parse_scenario(&s.to_json()).expect("serialized scenario parses");
        assert_eq!(back, s);
    }
});
