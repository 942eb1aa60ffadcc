//! Corpus manifest CSV.

use std::path::{Path, PathBuf};

use emovae_core::corpus::{validate_records, DialogueKind, UtteranceRecord};

use crate::{Error, Result};

pub const MANIFEST_HEADER: [&str; 9] = [
    "id",
    "audio_path",
    "session",
    "speaker",
    "dialogue_kind",
    "label",
    "arousal",
    "power",
    "valence",
];

/// Parses and validates a manifest. Errors carry the 1-based line number.
pub fn load_manifest(path: &Path) -> Result<Vec<UtteranceRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(file, path)
}

pub fn parse_manifest<R: std::io::Read>(reader: R, path: &Path) -> Result<Vec<UtteranceRecord>> {
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if header.iter().ne(MANIFEST_HEADER) {
        return Err(parse_err(
            1,
            format!(
                "header must be `{}`, found `{}`",
                MANIFEST_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |i: usize| row.get(i).unwrap_or_default();
        let number = |i: usize| -> Result<f64> {
            field(i).parse::<f64>().map_err(|_| {
                parse_err(
                    line,
                    format!("{} = '{}' is not a number", MANIFEST_HEADER[i], field(i)),
                )
            })
        };
        let record = UtteranceRecord {
            id: field(0).to_string(),
            audio_path: field(1).to_string(),
            session: field(2).parse().map_err(|_| {
                parse_err(
                    line,
                    format!("session = '{}' is not a positive integer", field(2)),
                )
            })?,
            speaker: field(3).to_string(),
            dialogue_kind: field(4)
                .parse::<DialogueKind>()
                .map_err(|e| parse_err(line, e.to_string()))?,
            categorical_raw: field(5).to_string(),
            arousal: number(6)?,
            power: number(7)?,
            valence: number(8)?,
        };
        record.validate().map_err(|e| parse_err(line, e.to_string()))?;
        records.push(record);
    }
    validate_records(&records)?;
    Ok(records)
}

pub fn write_manifest(path: &Path, records: &[UtteranceRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    let io = |e: csv::Error| Error::io(path, e.into());
    w.write_record(MANIFEST_HEADER).map_err(io)?;
    for r in records {
        w.write_record([
            r.id.as_str(),
            r.audio_path.as_str(),
            &r.session.to_string(),
            r.speaker.as_str(),
            r.dialogue_kind.name(),
            r.categorical_raw.as_str(),
            &r.arousal.to_string(),
            &r.power.to_string(),
            &r.valence.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Audio path of `record`, relative paths taken from the manifest's directory.
pub fn resolve_audio_path(manifest: &Path, record: &UtteranceRecord) -> PathBuf {
    let p = Path::new(&record.audio_path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        manifest.parent().unwrap_or(Path::new(".")).join(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "id,audio_path,session,speaker,dialogue_kind,label,arousal,power,valence\n";

    fn parse(body: &str) -> Result<Vec<UtteranceRecord>> {
        parse_manifest(format!("{HEADER}{body}").as_bytes(), Path::new("m.csv"))
    }

    #[test]
    fn well_formed_rows() {
        let rows = parse(
            "a,a.wav,1,F1,improvised,excited,3.5,3,2.5\n\
             b,b.wav,1,M1,scripted,neutral,3,3,3\n\
             c,sub/c.wav,2,F2,improvised,frustration,1,5,4.5\n",
        )
        .unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].categorical_raw, "excited");
        assert_eq!(rows[1].dialogue_kind, DialogueKind::Scripted);
        assert_eq!(rows[2].power, 5.0);
        assert_eq!(
            resolve_audio_path(Path::new("/data/m.csv"), &rows[2]),
            PathBuf::from("/data/sub/c.wav")
        );
    }

    #[test]
    fn out_of_range_reports_line() {
        let err =
            parse("a,a.wav,1,F1,improvised,sad,3,3,3\nb,b.wav,1,F1,improvised,sad,7,3,3\n").unwrap_err();
        match &err {
            Error::Parse { line, message, .. } => {
                assert_eq!(*line, 3);
                assert!(message.contains("arousal"), "{message}");
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn malformed_rows_report_line() {
        let err = parse("a,a.wav,one,F1,improvised,sad,3,3,3\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse("a,a.wav,1,F1,improvised,sad,3,3\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse("a,a.wav,1,F1,unscripted,sad,3,3,3\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn duplicate_ids_are_named() {
        let err =
            parse("dup,a.wav,1,F1,improvised,sad,3,3,3\ndup,b.wav,2,F1,improvised,sad,3,3,3\n").unwrap_err();
        assert!(err.to_string().contains("'dup'"), "{err}");
    }

    #[test]
    fn wrong_header_rejected() {
        let err = parse_manifest("id,path\na,b\n".as_bytes(), Path::new("m.csv")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn write_then_load_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let rows = parse("a,a.wav,1,F1,improvised,excited,3.5,3,2.5\n").unwrap();
        let path = dir.path().join("m.csv");
        write_manifest(&path, &rows).unwrap();
        assert_eq!(load_manifest(&path).unwrap(), rows);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(HEADER));
    }
}
