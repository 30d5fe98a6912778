/**
 * Browser entry point. Boots the page controller once the document is
 * ready; everything else lives in testable modules.
 */
import { boot } from "./app.js";

const start = () => {
  void boot(document);
};

if (document.readyState === "loading") {
  document.addEventListener("DOMContentLoaded", start);
} else {
  start();
}
