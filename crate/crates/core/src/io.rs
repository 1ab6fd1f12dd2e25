//! On-disk formats.
//!
//! Text formats (events, calibration, velocity) are whitespace-separated
//! with `#` comment lines; floats are written with Rust's shortest
//! round-trip formatting, so write→read reproduces values exactly.
//! Disparity and ground-truth maps travel as 16-bit binary PGM
//! (big-endian, maxval 65535, 65535 = invalid/hole); ground truth is
//! stored in 1/256-pixel steps to keep fractional disparities. Volume
//! and cost dumps are a text header line followed by raw voxels in
//! (d, y, x) order.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::grid::Grid2;
use crate::pipeline::CostKind;
use crate::types::{
    validate_batch, CameraRig, CostVolume, DisparityMap, Event, EventBatch,
    EventDisparityVolume, Velocity,
};

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn field<T: std::str::FromStr>(
    it: &mut std::str::SplitWhitespace<'_>,
    path: &Path,
    line: usize,
    name: &str,
) -> Result<T> {
    let tok = it
        .next()
        .ok_or_else(|| parse_err(path, line, format!("missing field `{name}`")))?;
    tok.parse()
        .map_err(|_| parse_err(path, line, format!("bad {name} `{tok}`")))
}

fn expect_end(it: &mut std::str::SplitWhitespace<'_>, path: &Path, line: usize) -> Result<()> {
    match it.next() {
        None => Ok(()),
        Some(extra) => Err(parse_err(path, line, format!("unexpected trailing `{extra}`"))),
    }
}

/// Lines of `t x y p`, `#` comments ignored. Polarity 0 is read as −1.
/// The batch is validated against the rig (bounds, polarity, ordering).
pub fn read_events(path: impl AsRef<Path>, rig: &CameraRig) -> Result<EventBatch> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut events = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut it = trimmed.split_whitespace();
        let t: f64 = field(&mut it, path, line, "t")?;
        let x: u16 = field(&mut it, path, line, "x")?;
        let y: u16 = field(&mut it, path, line, "y")?;
        let p: i8 = field(&mut it, path, line, "p")?;
        expect_end(&mut it, path, line)?;
        if !t.is_finite() {
            return Err(parse_err(path, line, format!("non-finite timestamp {t}")));
        }
        let p = match p {
            0 => -1,
            -1 | 1 => p,
            other => return Err(parse_err(path, line, format!("polarity {other} not in {{-1, 0, 1}}"))),
        };
        events.push(Event { t, x, y, p });
    }
    validate_batch(events, rig)
}

pub fn write_events(path: impl AsRef<Path>, events: &[Event]) -> Result<()> {
    let mut out = String::with_capacity(events.len() * 24);
    for e in events {
        writeln!(out, "{} {} {} {}", e.t, e.x, e.y, e.p).expect("string write");
    }
    fs::write(path, out)?;
    Ok(())
}

/// Key-value lines: `f cx cy baseline width height`, any order.
pub fn read_calibration(path: impl AsRef<Path>) -> Result<CameraRig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut f = None;
    let mut cx = None;
    let mut cy = None;
    let mut baseline = None;
    let mut width = None;
    let mut height = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut it = trimmed.split_whitespace();
        let key = it.next().expect("nonempty line has a token");
        match key {
            "f" => f = Some(field::<f64>(&mut it, path, line, "f")?),
            "cx" => cx = Some(field::<f64>(&mut it, path, line, "cx")?),
            "cy" => cy = Some(field::<f64>(&mut it, path, line, "cy")?),
            "baseline" => baseline = Some(field::<f64>(&mut it, path, line, "baseline")?),
            "width" => width = Some(field::<u32>(&mut it, path, line, "width")?),
            "height" => height = Some(field::<u32>(&mut it, path, line, "height")?),
            other => return Err(parse_err(path, line, format!("unknown key `{other}`"))),
        }
        expect_end(&mut it, path, line)?;
    }
    let missing: Vec<&str> = [
        ("f", f.is_none()),
        ("cx", cx.is_none()),
        ("cy", cy.is_none()),
        ("baseline", baseline.is_none()),
        ("width", width.is_none()),
        ("height", height.is_none()),
    ]
    .iter()
    .filter(|(_, absent)| *absent)
    .map(|&(name, _)| name)
    .collect();
    if !missing.is_empty() {
        return Err(parse_err(path, 0, format!("missing keys: {}", missing.join(", "))));
    }
    CameraRig::new(
        f.unwrap(),
        cx.unwrap(),
        cy.unwrap(),
        baseline.unwrap(),
        width.unwrap(),
        height.unwrap(),
    )
}

pub fn write_calibration(path: impl AsRef<Path>, rig: &CameraRig) -> Result<()> {
    let text = format!(
        "f {}\ncx {}\ncy {}\nbaseline {}\nwidth {}\nheight {}\n",
        rig.f, rig.cx, rig.cy, rig.baseline, rig.width, rig.height
    );
    fs::write(path, text)?;
    Ok(())
}

/// Lines of `t vx vy vz wx wy wz`; at least one record required.
pub fn read_velocity_records(path: impl AsRef<Path>) -> Result<Vec<(f64, Velocity)>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut records = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut it = trimmed.split_whitespace();
        let t: f64 = field(&mut it, path, line, "t")?;
        let mut comps = [0.0f64; 6];
        for (i, name) in ["vx", "vy", "vz", "wx", "wy", "wz"].iter().enumerate() {
            comps[i] = field(&mut it, path, line, name)?;
            if !comps[i].is_finite() {
                return Err(parse_err(path, line, format!("non-finite {name}")));
            }
        }
        expect_end(&mut it, path, line)?;
        let vel = Velocity::new(
            Vector3::new(comps[0], comps[1], comps[2]),
            Vector3::new(comps[3], comps[4], comps[5]),
        )?;
        records.push((t, vel));
    }
    if records.is_empty() {
        return Err(parse_err(path, 0, "no velocity records"));
    }
    Ok(records)
}

pub fn write_velocity_records(path: impl AsRef<Path>, records: &[(f64, Velocity)]) -> Result<()> {
    let mut out = String::new();
    for (t, v) in records {
        writeln!(
            out,
            "{} {} {} {} {} {} {}",
            t, v.linear.x, v.linear.y, v.linear.z, v.angular.x, v.angular.y, v.angular.z
        )
        .expect("string write");
    }
    fs::write(path, out)?;
    Ok(())
}

/// Binary 16-bit PGM (P5, maxval 65535, big-endian).
pub fn write_pgm16(path: impl AsRef<Path>, width: u32, height: u32, values: &[u16]) -> Result<()> {
    assert_eq!(values.len(), width as usize * height as usize);
    let mut buf = format!("P5\n{width} {height}\n65535\n").into_bytes();
    buf.reserve(values.len() * 2);
    for v in values {
        buf.extend_from_slice(&v.to_be_bytes());
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn read_pgm16(path: impl AsRef<Path>) -> Result<(u32, u32, Vec<u16>)> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    let mut pos = 0usize;
    let mut token = |bytes: &[u8]| -> Result<String> {
        // Skip whitespace and `#` comments, then read one token.
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(parse_err(path, 1, "truncated header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };

    if token(&bytes)? != "P5" {
        return Err(parse_err(path, 1, "not a binary PGM (P5)"));
    }
    let width: u32 = token(&bytes)?
        .parse()
        .map_err(|_| parse_err(path, 1, "bad width"))?;
    let height: u32 = token(&bytes)?
        .parse()
        .map_err(|_| parse_err(path, 1, "bad height"))?;
    let maxval = token(&bytes)?;
    if maxval != "65535" {
        return Err(parse_err(path, 1, format!("unsupported maxval {maxval}")));
    }
    // Exactly one whitespace byte separates the header from the data.
    pos += 1;
    let n = width as usize * height as usize;
    let data = bytes
        .get(pos..pos + 2 * n)
        .ok_or_else(|| parse_err(path, 1, "truncated pixel data"))?;
    if pos + 2 * n != bytes.len() {
        return Err(parse_err(path, 1, "trailing bytes after pixel data"));
    }
    let values = data
        .chunks_exact(2)
        .map(|b| u16::from_be_bytes([b[0], b[1]]))
        .collect();
    Ok((width, height, values))
}

pub const PGM_INVALID: u16 = 65535;

/// Winning disparity per pixel; invalid pixels carry `PGM_INVALID`.
pub fn write_disparity_pgm(path: impl AsRef<Path>, map: &DisparityMap) -> Result<()> {
    let values: Vec<u16> = map
        .d_hat
        .data()
        .iter()
        .zip(map.valid.data())
        .map(|(&d, &valid)| if valid { d } else { PGM_INVALID })
        .collect();
    write_pgm16(path, map.width(), map.height(), &values)
}

const GT_SCALE: f64 = 256.0;

/// Ground-truth disparity in 1/256-px steps; NaN holes map to
/// `PGM_INVALID`. Disparities at or above 256 px do not fit.
pub fn write_gt_pgm(path: impl AsRef<Path>, gt: &Grid2<f32>) -> Result<()> {
    let mut values = Vec::with_capacity(gt.len());
    for &d in gt.data() {
        let v = if d.is_finite() {
            let scaled = (f64::from(d) * GT_SCALE).round();
            if !(0.0..f64::from(PGM_INVALID)).contains(&scaled) {
                return Err(Error::InvalidConfig(format!(
                    "ground-truth disparity {d} outside the PGM range"
                )));
            }
            scaled as u16
        } else {
            PGM_INVALID
        };
        values.push(v);
    }
    write_pgm16(path, gt.width(), gt.height(), &values)
}

pub fn read_gt_pgm(path: impl AsRef<Path>) -> Result<Grid2<f32>> {
    let (width, height, values) = read_pgm16(path)?;
    let data = values
        .into_iter()
        .map(|v| {
            if v == PGM_INVALID {
                f32::NAN
            } else {
                (f64::from(v) / GT_SCALE) as f32
            }
        })
        .collect();
    Ok(Grid2::from_vec(width, height, data))
}

/// `x,y,d,cost_ratio` rows for pixels that are valid and saw raw events;
/// the ratio is `C_I / C_U` at the winning disparity.
pub fn write_sparse_csv(
    path: impl AsRef<Path>,
    map: &DisparityMap,
    costs: &CostVolume,
) -> Result<()> {
    let mut out = String::from("x,y,d,cost_ratio\n");
    for (x, y) in map.d_hat.coords() {
        if !(map.valid.get(x, y) && map.has_events.get(x, y)) {
            continue;
        }
        let d = map.d_hat.get(x, y);
        let k = costs.slice_index(u32::from(d));
        let ci = costs.c_i[k].get(x, y);
        let cu = costs.c_u[k].get(x, y);
        let ratio = if cu > 0 {
            f64::from(ci) / f64::from(cu)
        } else {
            0.0
        };
        writeln!(out, "{x},{y},{d},{ratio:.6}").expect("string write");
    }
    fs::write(path, out)?;
    Ok(())
}

/// Header `width height num_disparities d_min t_ref`, then signed 8-bit
/// voxels in (d, y, x) order.
pub fn write_volume_dump(path: impl AsRef<Path>, vol: &EventDisparityVolume) -> Result<()> {
    let mut buf = format!(
        "{} {} {} {} {}\n",
        vol.width(),
        vol.height(),
        vol.num_disparities(),
        vol.d_min(),
        vol.t_ref()
    )
    .into_bytes();
    buf.reserve(vol.slices().len() * vol.slices()[0].len());
    for slice in vol.slices() {
        buf.extend(slice.data().iter().map(|&v| v as u8));
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn read_volume_dump(path: impl AsRef<Path>) -> Result<EventDisparityVolume> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| parse_err(path, 1, "missing header line"))?;
    let header = String::from_utf8_lossy(&bytes[..nl]);
    let mut it = header.split_whitespace();
    let width: u32 = field(&mut it, path, 1, "width")?;
    let height: u32 = field(&mut it, path, 1, "height")?;
    let num_d: u32 = field(&mut it, path, 1, "num_disparities")?;
    let d_min: u32 = field(&mut it, path, 1, "d_min")?;
    let t_ref: f64 = field(&mut it, path, 1, "t_ref")?;
    expect_end(&mut it, path, 1)?;

    let data = &bytes[nl + 1..];
    let slice_len = width as usize * height as usize;
    if data.len() != slice_len * num_d as usize {
        return Err(parse_err(
            path,
            1,
            format!("expected {} voxels, found {}", slice_len * num_d as usize, data.len()),
        ));
    }
    let slices = data
        .chunks_exact(slice_len)
        .map(|chunk| {
            let vals: Vec<i8> = chunk.iter().map(|&b| b as i8).collect();
            if let Some(bad) = vals.iter().find(|v| ![-1, 0, 1].contains(*v)) {
                return Err(parse_err(path, 1, format!("voxel value {bad} not in {{-1, 0, 1}}")));
            }
            Ok(Grid2::from_vec(width, height, vals))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EventDisparityVolume::from_slices(slices, d_min, t_ref))
}

/// Header `width height num_disparities d_min`, then little-endian f32
/// voxels in (d, y, x) order; undefined costs are +inf.
pub fn write_cost_dump(path: impl AsRef<Path>, slices: &[Grid2<f32>], d_min: u32) -> Result<()> {
    assert!(!slices.is_empty());
    let mut buf = format!(
        "{} {} {} {}\n",
        slices[0].width(),
        slices[0].height(),
        slices.len(),
        d_min
    )
    .into_bytes();
    buf.reserve(slices.len() * slices[0].len() * 4);
    for slice in slices {
        for v in slice.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn read_cost_dump(path: impl AsRef<Path>) -> Result<(Vec<Grid2<f32>>, u32)> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| parse_err(path, 1, "missing header line"))?;
    let header = String::from_utf8_lossy(&bytes[..nl]);
    let mut it = header.split_whitespace();
    let width: u32 = field(&mut it, path, 1, "width")?;
    let height: u32 = field(&mut it, path, 1, "height")?;
    let num_d: u32 = field(&mut it, path, 1, "num_disparities")?;
    let d_min: u32 = field(&mut it, path, 1, "d_min")?;
    expect_end(&mut it, path, 1)?;

    let data = &bytes[nl + 1..];
    let slice_len = width as usize * height as usize;
    if data.len() != slice_len * num_d as usize * 4 {
        return Err(parse_err(path, 1, "cost data length mismatch"));
    }
    let slices = data
        .chunks_exact(slice_len * 4)
        .map(|chunk| {
            let vals: Vec<f32> = chunk
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            Grid2::from_vec(width, height, vals)
        })
        .collect();
    Ok((slices, d_min))
}

/// One row of the metrics table.
#[derive(Debug, Clone, Copy)]
pub struct MetricsRecord<'a> {
    pub variant: &'a str,
    pub cost: CostKind,
    pub sync: bool,
    pub noise_pct: f64,
    pub window: u32,
    pub metrics: crate::eval::Metrics,
}

pub fn write_metrics_csv(path: impl AsRef<Path>, records: &[MetricsRecord<'_>]) -> Result<()> {
    let mut out = String::from(
        "variant,cost,sync,noise_pct,window,mean_disp_err,mean_depth_err,pct_within_1,n_compared,n_rejected\n",
    );
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{:.6},{:.6},{:.6},{},{}",
            r.variant,
            r.cost,
            r.sync,
            r.noise_pct,
            r.window,
            r.metrics.mean_disp_err,
            r.metrics.mean_depth_err,
            r.metrics.pct_within_1,
            r.metrics.n_compared,
            r.metrics.n_rejected,
        )
        .expect("string write");
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use tempfile::tempdir;

    use super::*;
    use crate::types::COST_UNDEFINED;

    fn rig() -> CameraRig {
        CameraRig::new(300.0, 172.5, 129.5, 0.1, 346, 260).unwrap()
    }

    #[test]
    fn events_round_trip_field_exactly() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("events.txt");
        let events = vec![
            Event { t: 0.000001, x: 0, y: 0, p: 1 },
            Event { t: 0.123456789012345, x: 345, y: 259, p: -1 },
            Event { t: 1e3, x: 7, y: 9, p: 1 },
        ];
        write_events(&path, &events).unwrap();
        let back = read_events(&path, &rig()).unwrap();
        assert_eq!(back.events(), events.as_slice());
    }

    #[test]
    fn comments_blanks_and_zero_polarity_are_handled() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("events.txt");
        fs::write(&path, "# header\n\n0.5 10 20 0\n0.75 11 21 1\n").unwrap();
        let batch = read_events(&path, &rig()).unwrap();
        assert_eq!(batch.events()[0].p, -1, "wire polarity 0 maps to -1");
        assert_eq!(batch.events()[1].p, 1);
    }

    #[test]
    fn event_parse_errors_name_the_line() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("events.txt");
        fs::write(&path, "0.5 10 20 1\n0.6 10 20 1\n0.7 10 oops 1\n").unwrap();
        match read_events(&path, &rig()) {
            Err(Error::Parse { line: 3, .. }) => {}
            other => panic!("expected a line-3 parse error, got {other:?}"),
        }
        fs::write(&path, "0.5 10 20 1 9\n").unwrap();
        assert!(matches!(
            read_events(&path, &rig()),
            Err(Error::Parse { line: 1, .. })
        ));
        fs::write(&path, "0.5 10 20 5\n").unwrap();
        assert!(matches!(
            read_events(&path, &rig()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn calibration_round_trips_and_rejects_unknown_keys() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("calib.txt");
        let rig = rig();
        write_calibration(&path, &rig).unwrap();
        assert_eq!(read_calibration(&path).unwrap(), rig);

        fs::write(&path, "f 300\ncx 1\ncy 1\nbaseline 0.1\nwidth 10\nheight 10\nfov 90\n").unwrap();
        assert!(matches!(
            read_calibration(&path),
            Err(Error::Parse { line: 7, .. })
        ));

        fs::write(&path, "f 300\ncx 1\n").unwrap();
        match read_calibration(&path) {
            Err(Error::Parse { msg, .. }) => assert!(msg.contains("baseline"), "{msg}"),
            other => panic!("expected missing-key error, got {other:?}"),
        }
    }

    #[test]
    fn velocity_records_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("vel.txt");
        let records = vec![
            (0.0, Velocity::new(Vector3::new(0.1, 0.2, 0.3), Vector3::new(-0.01, 0.02, 0.5)).unwrap()),
            (0.25, Velocity::zero()),
        ];
        write_velocity_records(&path, &records).unwrap();
        assert_eq!(read_velocity_records(&path).unwrap(), records);

        fs::write(&path, "# only comments\n").unwrap();
        assert!(matches!(
            read_velocity_records(&path),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn pgm16_round_trips_and_validates_header() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("map.pgm");
        let values: Vec<u16> = (0..12).map(|v| v * 5000).collect();
        write_pgm16(&path, 4, 3, &values).unwrap();
        assert_eq!(read_pgm16(&path).unwrap(), (4, 3, values));

        fs::write(&path, b"P2\n2 2\n65535\n0 0 0 0\n").unwrap();
        assert!(read_pgm16(&path).is_err());
        fs::write(&path, b"P5\n2 2\n255\n\x00\x00\x00\x00").unwrap();
        assert!(read_pgm16(&path).is_err());
    }

    #[test]
    fn pgm16_reader_accepts_header_comments() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("map.pgm");
        let mut bytes = b"P5\n# made elsewhere\n2 1\n65535\n".to_vec();
        bytes.extend_from_slice(&[0x01, 0x00, 0xff, 0xff]);
        fs::write(&path, bytes).unwrap();
        assert_eq!(read_pgm16(&path).unwrap(), (2, 1, vec![256, 65535]));
    }

    #[test]
    fn disparity_pgm_marks_invalid_pixels() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("disp.pgm");
        let mut map = DisparityMap::new(2, 1);
        map.valid.set(0, 0, true);
        map.d_hat.set(0, 0, 17);
        write_disparity_pgm(&path, &map).unwrap();
        let (_, _, values) = read_pgm16(&path).unwrap();
        assert_eq!(values, vec![17, PGM_INVALID]);
    }

    #[test]
    fn gt_pgm_keeps_quarter_pixel_disparities_and_holes() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("gt.pgm");
        let mut gt = Grid2::filled(3, 1, f32::NAN);
        gt.set(0, 0, 15.25);
        gt.set(1, 0, 0.0);
        write_gt_pgm(&path, &gt).unwrap();
        let back = read_gt_pgm(&path).unwrap();
        assert_eq!(back.get(0, 0), 15.25);
        assert_eq!(back.get(1, 0), 0.0);
        assert!(back.get(2, 0).is_nan());

        gt.set(2, 0, 300.0);
        assert!(write_gt_pgm(&path, &gt).is_err(), "disparity 300 px cannot fit");
    }

    #[test]
    fn sparse_csv_lists_only_surviving_event_pixels() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("sparse.csv");
        let mut map = DisparityMap::new(3, 1);
        let costs = CostVolume::new(
            vec![Grid2::filled(3, 1, 3u32)],
            vec![Grid2::filled(3, 1, 4u32)],
            vec![Grid2::filled(3, 1, -0.75f32)],
            0,
        );
        map.valid.set(0, 0, true);
        map.has_events.set(0, 0, true);
        map.valid.set(1, 0, true); // no raw events: excluded
        map.has_events.set(2, 0, true); // rejected: excluded
        write_sparse_csv(&path, &map, &costs).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text, "x,y,d,cost_ratio\n0,0,0,0.750000\n");
    }

    #[test]
    fn volume_dump_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("vol.bin");
        let slices = vec![
            Grid2::from_vec(2, 2, vec![1i8, 0, -1, 0]),
            Grid2::from_vec(2, 2, vec![0i8, -1, 1, 1]),
        ];
        let vol = EventDisparityVolume::from_slices(slices, 3, 0.125);
        write_volume_dump(&path, &vol).unwrap();
        let back = read_volume_dump(&path).unwrap();
        assert_eq!(back, vol);
    }

    #[test]
    fn volume_dump_rejects_out_of_domain_voxels() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("vol.bin");
        fs::write(&path, b"1 1 1 0 0\n\x05").unwrap();
        assert!(read_volume_dump(&path).is_err());
    }

    #[test]
    fn cost_dump_round_trips_with_sentinels() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("cost.bin");
        let slices = vec![
            Grid2::from_vec(2, 1, vec![-0.5f32, COST_UNDEFINED]),
            Grid2::from_vec(2, 1, vec![-1.0f32, -0.25]),
        ];
        write_cost_dump(&path, &slices, 5).unwrap();
        let (back, d_min) = read_cost_dump(&path).unwrap();
        assert_eq!(d_min, 5);
        assert_eq!(back, slices);
        assert_eq!(back[0].get(1, 0), COST_UNDEFINED);
    }

    #[test]
    fn metrics_csv_has_the_stable_header() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        let metrics = crate::eval::Metrics {
            mean_disp_err: 0.5,
            mean_depth_err: f64::NAN,
            pct_within_1: 92.5,
            pct_within_1_strict: 90.0,
            pct_within_1_covered: 88.0,
            n_compared: 1000,
            n_rejected: 50,
        };
        let rows = [MetricsRecord {
            variant: "iou-sync",
            cost: CostKind::Iou,
            sync: true,
            noise_pct: 0.2,
            window: 24,
            metrics,
        }];
        write_metrics_csv(&path, &rows).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "variant,cost,sync,noise_pct,window,mean_disp_err,mean_depth_err,pct_within_1,n_compared,n_rejected"
        );
        assert_eq!(
            lines.next().unwrap(),
            "iou-sync,iou,true,0.2,24,0.500000,NaN,92.500000,1000,50"
        );
    }
}
