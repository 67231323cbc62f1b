//! Writes a thinned knowledge base to disk, reads it back and rebuilds the
//! problem from it.

use stopgen::ea::EAConfig;
use stopgen::generator::{build_knowledge_base, generate_problem, GeneratorConfig};
use stopgen::{FamilyId, KnowledgeBase, SimilaritySpec, TransferScenario};

fn main() -> stopgen::Result<()> {
    let config = GeneratorConfig::new(FamilyId::Griewank, TransferScenario::InterFamily, SimilaritySpec::M2, 8, 6);
    let problem = generate_problem(&config, 21)?;
    let kb = build_knowledge_base(&problem, &EAConfig::default().with_budget(1000), 21, 5)?;

    let path = std::env::temp_dir().join(format!("{}.json", problem.name));
    kb.save(&path)?;
    let size = std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0);
    let back = KnowledgeBase::load(&path)?;
    assert_eq!(back, kb);
    assert_eq!(back.to_problem()?, problem);

    println!("{} -> {} ({size} bytes)", problem.name, path.display());
    for (i, rec) in back.sources.iter().enumerate() {
        println!(
            "source {i}: {:<9} {} stored generations, best {:.4}",
            rec.family.label(),
            rec.generations.len(),
            rec.best_fitness
        );
    }
    std::fs::remove_file(&path).ok();
    Ok(())
}
