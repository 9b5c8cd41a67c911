//! Records a simulated run into a TGF1 archive, writes it to the temp
//! directory and reads it back.

use tactile_slip::io::archive::{FrameArchive, PixelFormat, Recorder, HEADER_LEN};
use tactile_slip::io::config::RunConfig;
use tactile_slip::run::run_to_completion;
use tactile_slip::sim::{Scenario, SimWorld};

fn main() -> tactile_slip::Result<()> {
    let scenario = Scenario::preset("egg")?;
    let config = RunConfig::default();
    let world = SimWorld::new(&scenario, config.seed, config.dt_s)?;

    for format in [PixelFormat::U8Rgb, PixelFormat::F32Rgb] {
        let mut recorder = Recorder::new(world.clone(), scenario.params.dims, format)?;
        run_to_completion(&config, scenario.task, &scenario.name, &mut recorder)?;
        let (_, archive) = recorder.finish();

        let path = std::env::temp_dir().join(format!("egg-{format:?}.tgf"));
        archive.write(&path)?;
        let back = FrameArchive::read(&path)?;
        let h = back.header();
        println!(
            "{format:?}: {} steps x {} sensors of {}x{}, {} bytes, identical={}",
            h.frame_count,
            h.sensor_count,
            h.h,
            h.w,
            HEADER_LEN + back.payload().len(),
            back == archive
        );
        let first = back.frame(0, 0)?;
        println!("  first pixel of S1 at t=0: {:?}", &first.data()[..3]);
    }

    // Corruption is reported with the offending offset.
    let mut bytes = FrameArchive::read(&std::env::temp_dir().join("egg-U8Rgb.tgf"))?.to_bytes();
    bytes.truncate(bytes.len() - 100);
    if let Err(e) = FrameArchive::from_bytes(&bytes) {
        println!("truncated copy: {e}");
    }
    Ok(())
}
