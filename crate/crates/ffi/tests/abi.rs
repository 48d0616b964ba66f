use std::ffi::{CStr, CString};
use std::ptr;

use agree_kit_ffi::*;

const WORKED: &str = include_str!("../../core/fixtures/worked_examples.jsonl");

fn last_error() -> String {
    let p = ak_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn parse(text: &str, csv: bool) -> Result<*mut AkDataset, AkStatus> {
    let mut ds = ptr::null_mut();
    let status = unsafe { ak_dataset_parse(text.as_ptr(), text.len(), i32::from(csv), &mut ds) };
    if status == AkStatus::Ok {
        Ok(ds)
    } else {
        Err(status)
    }
}

fn aggregate(
    ds: *const AkDataset,
    scheme: u32,
    strategy: &str,
    seed: Option<u64>,
) -> Result<String, AkStatus> {
    let name = CString::new(strategy).unwrap();
    let mut out = ptr::null_mut();
    let status = unsafe {
        ak_aggregate_jsonl(
            ds,
            scheme,
            name.as_ptr(),
            i32::from(seed.is_some()),
            seed.unwrap_or(0),
            0,
            &mut out,
        )
    };
    if status != AkStatus::Ok {
        return Err(status);
    }
    let text = unsafe { CStr::from_ptr(out) }.to_str().unwrap().to_string();
    unsafe { ak_string_free(out) };
    Ok(text)
}

#[test]
fn dataset_lifecycle_and_aggregation() {
    let ds = parse(WORKED, false).unwrap();
    assert_eq!(unsafe { ak_dataset_len(ds) }, 5);
    let text = aggregate(ds, 6, "max", None).unwrap();
    let rows: Vec<serde_json::Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(rows.len(), 5);
    let tie = rows.iter().find(|r| r["item_id"] == "tie").unwrap();
    assert_eq!(tie["label"], 5);
    assert_eq!(tie["majority"], serde_json::json!([4, 5]));

    // simple drops the two tied items
    assert_eq!(aggregate(ds, 6, "simple", None).unwrap().lines().count(), 3);
    assert_eq!(
        aggregate(ds, 4, "wrandom", Some(9)).unwrap(),
        aggregate(ds, 4, "wrandom", Some(9)).unwrap()
    );
    unsafe { ak_dataset_free(ds) };
}

#[test]
fn errors_carry_status_and_message() {
    let ds = parse(WORKED, false).unwrap();
    assert_eq!(aggregate(ds, 6, "random", None), Err(AkStatus::Validation));
    assert!(last_error().contains("seed"));
    assert_eq!(aggregate(ds, 5, "min", None), Err(AkStatus::Validation));
    assert_eq!(aggregate(ds, 6, "median", None), Err(AkStatus::Validation));
    assert_eq!(
        aggregate(ptr::null(), 6, "min", None),
        Err(AkStatus::NullPointer)
    );
    unsafe { ak_dataset_free(ds) };

    let bad = "{\"item_id\":\"a\",\"annotator_id\":\"x\",\"labels\":[9]}\n";
    assert_eq!(parse(bad, false).unwrap_err(), AkStatus::Validation);
    assert!(last_error().contains("line 1"), "{}", last_error());

    let mut ds = ptr::null_mut();
    let bytes = [0xffu8, 0xfe];
    let status = unsafe { ak_dataset_parse(bytes.as_ptr(), bytes.len(), 0, &mut ds) };
    assert_eq!(status, AkStatus::Validation);
    assert!(ds.is_null());
    assert_eq!(
        unsafe { ak_dataset_parse(ptr::null(), 0, 0, &mut ds) },
        AkStatus::NullPointer
    );

    let mut label = 0u8;
    assert_eq!(unsafe { ak_reduce_label(1, 6, &mut label) }, AkStatus::Ok);
    assert!(ak_last_error_message().is_null());
}

#[test]
fn csv_input() {
    let csv = "item_id,annotator_id,labels,strength\nq,a,2;3,4\nq,b,3,\n";
    let ds = parse(csv, true).unwrap();
    assert_eq!(unsafe { ak_dataset_len(ds) }, 1);
    let text = aggregate(ds, 4, "min", None).unwrap();
    assert!(text.contains("\"label\":2"), "{text}");
    unsafe { ak_dataset_free(ds) };
}

#[test]
fn scalar_helpers() {
    let expected = [
        (0, 0, 0),
        (1, 1, 1),
        (2, 2, 1),
        (3, 2, 1),
        (4, 3, 1),
        (5, 3, 1),
    ];
    for (l, four, two) in expected {
        let mut out = 99u8;
        assert_eq!(unsafe { ak_reduce_label(l, 4, &mut out) }, AkStatus::Ok);
        assert_eq!(out, four);
        assert_eq!(unsafe { ak_reduce_label(l, 2, &mut out) }, AkStatus::Ok);
        assert_eq!(out, two);
    }
    let mut out = 0u8;
    assert_eq!(
        unsafe { ak_reduce_label(6, 4, &mut out) },
        AkStatus::Validation
    );

    let mut s = 0.0;
    assert_eq!(
        unsafe { ak_ensemble_score(0.4, 0.9, 0.93, &mut s) },
        AkStatus::Ok
    );
    assert!((s - (0.93 * 0.4 + 0.07 * 0.9)).abs() < 1e-12);
    assert_eq!(
        unsafe { ak_ensemble_score(0.4, 0.9, 1.5, &mut s) },
        AkStatus::Validation
    );
    assert_eq!(
        unsafe { ak_ensemble_score(0.4, 0.9, 0.5, ptr::null_mut()) },
        AkStatus::NullPointer
    );

    assert_eq!(ak_binarize(0.5, 0.5), 0);
    assert_eq!(ak_binarize(0.5000001, 0.5), 1);
}

#[test]
fn header_declares_the_api() {
    let header = include_str!("../include/agree_kit.h");
    for sym in [
        "ak_dataset_parse",
        "ak_dataset_free",
        "ak_dataset_len",
        "ak_aggregate_jsonl",
        "ak_string_free",
        "ak_reduce_label",
        "ak_ensemble_score",
        "ak_binarize",
        "ak_last_error_message",
        "typedef struct AkDataset AkDataset",
        "AK_STATUS_COVERAGE = 3",
    ] {
        assert!(header.contains(sym), "header lacks {sym}");
    }
}
