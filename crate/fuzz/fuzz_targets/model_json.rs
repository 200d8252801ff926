#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(model) = mssl::TrainedModel::from_json_str(text) {
            // anything that loads must serialize back
            let _ = model.to_json_string();
        }
    }
});
