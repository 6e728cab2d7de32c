use std::io::Write;

use tabsynth::classifiers::TrainedModel;
use tabsynth::{ClassLabel, FeatureTable};

/// Writes one CSV row per table row: the true label, the predicted label and
/// the per-class scores.
pub fn export_predictions<W: Write>(model: &TrainedModel, table: &FeatureTable, w: &mut W) -> tabsynth::Result<()> {
    write!(w, "true,pred")?;
    for label in ClassLabel::ALL {
        write!(w, ",score_{}", label.name())?;
    }
    writeln!(w)?;
    let scores = model.predict_scores(table)?;
    for (truth, s) in table.labels().iter().zip(&scores) {
        write!(w, "{},{}", truth.name(), model.label_from_scores(s).name())?;
        for v in s {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}
