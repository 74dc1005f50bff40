//! Generate the default cohort in memory and look at its structure.

use mgmu::synth::{coupling_matrix, generate_cohort, spectral_radius_bound, split_subjects, Class, CohortSpec};
use mgmu::features::Modality;

fn main() -> mgmu::Result<()> {
    let spec = CohortSpec::default();
    let cohort = generate_cohort(&spec)?;
    for class in Class::ALL {
        let subjects = cohort.subjects.iter().filter(|s| s.class == class).count();
        let sessions = cohort.sessions.iter().filter(|s| s.class == class).count();
        println!("{:<5} {subjects:>3} subjects {sessions:>4} sessions", class.name());
    }

    let s = &cohort.subjects[cohort.subjects.len() - 1];
    println!("\n{} BPRS {:?} -> {}", s.id, s.bprs, s.class.name());

    for class in Class::ALL {
        let a = coupling_matrix(&spec, Modality::Audio, class, "demo")?;
        println!("{:<5} audio coupling spectral bound {:.3}", class.name(), spectral_radius_bound(&a, 8));
    }

    let roster: Vec<_> = cohort.subjects.iter().map(|s| (s.id.clone(), s.class)).collect();
    let splits = split_subjects(&roster, [0.7, 0.15, 0.15], spec.seed)?;
    println!("\nsplit {}/{}/{}; test = {:?}", splits.train.len(), splits.val.len(), splits.test.len(), splits.test);
    Ok(())
}
