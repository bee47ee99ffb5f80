//! The text-complexity battery on its own: sentence splitting, syllable
//! counting, six grade formulas, difficult words, and token length.
//!
//! Run with: cargo run --example readability_scores

use pielab::readability::{
    compute_stats, count_syllables, grade_scores, split_sentences, EasyWordList,
};

fn main() {
    let easy = EasyWordList::builtin();
    println!("easy-word list: {} words", easy.len());

    let samples = [
        "The cat sat on the mat.",
        "We like to read a good book at night. The happy children played a simple game.",
        "The perspicacious adjudicator formulated an extraordinarily convoluted determination. \
         Institutional stakeholders nevertheless articulated considerable consternation.",
    ];

    for text in samples {
        let stats = compute_stats(text, &easy);
        println!("\ntext: {text}");
        println!(
            "  {} words, {} sentences, {} syllables, {} complex, {} difficult",
            stats.words,
            stats.sentences,
            stats.total_syllables(),
            stats.complex_word_count,
            stats.difficult_word_count
        );
        match grade_scores(&stats) {
            Some(g) => {
                println!("  ARI             {:8.3}", g.ari);
                println!("  Coleman-Liau    {:8.3}", g.coleman_liau);
                println!("  Flesch-Kincaid  {:8.3}", g.flesch_kincaid);
                println!("  Linsear Write   {:8.3}", g.linsear_write);
                println!("  Gunning Fog     {:8.3}", g.gunning_fog);
                println!("  Dale-Chall      {:8.3}", g.dale_chall);
            }
            None => println!("  (empty text)"),
        }
    }

    println!(
        "\nsentence splitting: {:?}",
        split_sentences("A. B? C! x.. y")
    );
    for word in ["cat", "the", "table", "whale", "readability"] {
        println!("syllables({word}) = {}", count_syllables(word));
    }
}
