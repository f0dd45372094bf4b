import { AnnotationApi } from "./api.js";
import { ReviewApp } from "./ui.js";

const root = document.getElementById("app");
if (!root) {
  throw new Error("missing #app mount point");
}
const app = new ReviewApp(new AnnotationApi(""), root);
void app.start().catch((error) => {
  root.textContent = `Could not reach the annotation service: ${error}`;
});
