//! Corpora and headline phrase lists compiled into the binary.

use crate::params::Genre;

macro_rules! genre_assets {
    ($($genre:ident => $slug:literal),* $(,)?) => {
        /// `(corpus, headline tsv)` for a concrete genre.
        pub fn bundled(genre: Genre) -> (&'static str, &'static str) {
            match genre {
                $(Genre::$genre => (
                    include_str!(concat!("../assets/", $slug, ".txt")),
                    include_str!(concat!("../assets/", $slug, ".headlines.tsv")),
                ),)*
                Genre::Random => ("", ""),
            }
        }
    };
}

genre_assets! {
    Politics => "politics",
    ConspiracyTheory => "conspiracy-theory",
    ScienceNews => "science-news",
    CnnBusiness => "cnn-business",
    EntertainmentTonight => "entertainment-tonight",
    DailyMailHealth => "daily-mail-health",
    FoxSports => "fox-sports",
    IndependentWorldNews => "independent-world-news",
    CelebrityGossip => "celebrity-gossip",
    ChiTweets => "chi-tweets",
    RussiaToday => "russia-today",
}
